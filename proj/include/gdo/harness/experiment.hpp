#pragma once

// Grid execution: data preparation per (n_given, seed), one job per
// (method, n_given, inter_steps, seed), canonical ordering of the results.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "gdo/baselines.hpp"
#include "gdo/domains.hpp"
#include "gdo/gdo.hpp"
#include "gdo/harness/config.hpp"
#include "gdo/idx.hpp"

namespace gdo::harness {

struct ResultRow {
  std::string dataset;
  std::string method;
  std::size_t n_given = 0;
  std::size_t inter_steps = 0;
  std::uint64_t seed = 0;
  double target_acc = 0.0;
  std::vector<double> domain_acc;
  double runtime_ms = 0.0;
  std::uint64_t fingerprint = 0;

  auto key() const { return std::tie(method, n_given, inter_steps, seed); }
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct CellFailure {
  std::string method;
  std::size_t n_given = 0;
  std::size_t inter_steps = 0;
  std::uint64_t seed = 0;
  std::string category;
  std::string message;
};

struct GridResult {
  std::vector<ResultRow> rows;          // canonical order
  std::vector<CellFailure> failures;
  std::vector<double> wall_ms;          // measured time of rows[i]
};

/// Training sequence plus the held-out target rows, never seen in training.
struct CellData {
  DomainSequence seq;
  Dataset heldout_target;
  std::uint64_t fingerprint = 0;
};

inline bool is_mnist(const DatasetSpec& d) { return d.name == "rotated_mnist" || d.name == "color_shift_mnist"; }

inline Transform transform_for(const DatasetSpec& d) {
  if (d.name == "rotated_mnist") return Transform{TransformKind::rotate_image, 28};
  if (d.name == "color_shift_mnist") return Transform{TransformKind::color_shift, 0};
  return Transform{TransformKind::rotate2d, 0};
}

/// Rows held out so they make up holdout_fraction of the target pool.
inline std::size_t heldout_count(const DatasetSpec& d) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(d.n) * d.holdout_fraction / (1.0 - d.holdout_fraction)));
}

/// Loads the IDX pair named in the dataset settings. Missing files are a config error.
inline Dataset load_mnist(const DatasetSpec& d) {
  const auto dir = resolve_data_dir(d);
  const auto images = dir / d.images;
  const auto labels = dir / d.labels;
  for (const auto& p : {images, labels})
    if (!std::filesystem::exists(p)) throw ConfigError("data file not found: " + p.string());
  return load_idx(images, labels).data;
}

inline void center_columns(Dataset& ds) {
  if (ds.size() == 0) return;
  std::vector<double> mean = column_sums(ds.x);
  for (double& v : mean) v /= static_cast<double>(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.dim(); ++j) ds.x(i, j) -= mean[j];
}

/// n + heldout rows for one seed. `mnist` is the loaded IDX pool, if any.
inline Dataset draw_pool(const DatasetSpec& d, std::uint64_t seed, const Dataset* mnist) {
  const std::size_t total = d.n + heldout_count(d);
  if (is_mnist(d)) {
    if (!mnist) throw ContractError("draw_pool: MNIST pool not loaded");
    if (total > mnist->size())
      throw ArgumentError("dataset needs " + std::to_string(total) + " images, file has " +
                          std::to_string(mnist->size()));
    return subset(*mnist, sample_indices(mnist->size(), total, derive_seed(seed, 0x6000)));
  }
  Dataset pool = d.name == "two_moons" ? make_two_moons(total, d.noise, derive_seed(seed, 0x6001))
                                       : make_gaussians(total, d.classes, d.separation, d.noise,
                                                        derive_seed(seed, 0x6001));
  if (d.center) center_columns(pool);
  return pool;
}

inline CellData prepare_cell(const ExperimentConfig& cfg, std::size_t n_given, std::uint64_t seed,
                             const Dataset* mnist) {
  const DatasetSpec& d = cfg.dataset;
  Dataset pool = draw_pool(d, seed, mnist);
  auto held = sample_indices(pool.size(), heldout_count(d), derive_seed(seed, 0x6002));
  std::vector<bool> is_held(pool.size(), false);
  for (std::size_t i : held) is_held[i] = true;
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (!is_held[i]) train.push_back(i);

  const Transform tf = transform_for(d);
  CellData cell;
  cell.seq = build_sequence(subset(pool, train), tf, d.total_shift, n_given);
  cell.heldout_target = apply_transform(subset(pool, held), tf, d.total_shift);
  cell.fingerprint = sequence_fingerprint(cell.seq);
  return cell;
}

inline GdoResult run_method(const std::string& method, const DomainSequence& seq,
                            std::span<const std::size_t> hidden, const GdoConfig& cfg) {
  if (method == "gdo") return run_gdo(seq, hidden, cfg);
  if (method == "gst") return gst(seq, hidden, cfg);
  if (method == "source_only") return source_only(seq, hidden, cfg);
  if (method == "target_st") return target_self_train(seq, hidden, cfg);
  throw ConfigError("unknown method \"" + method + "\"");
}

inline std::string failure_category(const std::exception& e) {
  if (auto* g = dynamic_cast<const Error*>(&e)) return g->category();
  return "internal";
}

/// Every (method, n_given, inter_steps, seed) row. Methods other than gdo do
/// not read inter_steps; they run once per (n_given, seed) and the row is
/// repeated for each inter_steps value.
inline GridResult run_grid(const ExperimentConfig& cfg, std::size_t threads = 0) {
  validate(cfg);
  if (threads == 0) threads = cfg.threads;

  std::optional<Dataset> mnist;
  if (is_mnist(cfg.dataset)) mnist = load_mnist(cfg.dataset);

  struct Job {
    std::string method;
    std::size_t n_given;
    std::size_t inter_steps;  // value used for training; ignored by baselines
    std::uint64_t seed;
    std::size_t cell;
  };
  struct Outcome {
    std::optional<GdoResult> result;
    double target_acc = 0.0;
    double ms = 0.0;
    std::string category, message;
  };

  // Prepared data, one slot per (n_given, seed); shared read-only by jobs.
  std::vector<std::pair<std::size_t, std::uint64_t>> cell_keys;
  for (std::size_t g : cfg.n_given_grid)
    for (std::uint64_t s : cfg.seeds) cell_keys.emplace_back(g, s);
  std::vector<std::unique_ptr<CellData>> cells(cell_keys.size());
  std::vector<std::string> cell_error(cell_keys.size()), cell_category(cell_keys.size());
  for (std::size_t c = 0; c < cell_keys.size(); ++c) {
    try {
      cells[c] = std::make_unique<CellData>(
          prepare_cell(cfg, cell_keys[c].first, cell_keys[c].second, mnist ? &*mnist : nullptr));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      cell_category[c] = failure_category(e);
      cell_error[c] = e.what();
    }
  }

  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cell_keys.size(); ++c)
    for (const auto& m : cfg.methods) {
      if (m == "gdo")
        for (std::size_t is : cfg.inter_steps_grid) jobs.push_back({m, cell_keys[c].first, is, cell_keys[c].second, c});
      else
        jobs.push_back({m, cell_keys[c].first, cfg.inter_steps_grid.front(), cell_keys[c].second, c});
    }

  std::vector<Outcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      Outcome& out = outcomes[j];
      if (!cells[job.cell]) {
        out.category = cell_category[job.cell];
        out.message = "data preparation failed: " + cell_error[job.cell];
        continue;
      }
      GdoConfig g = cfg.gdo;
      g.seed = job.seed;
      g.inter_steps = job.inter_steps;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        GdoResult r = run_method(job.method, cells[job.cell]->seq, cfg.hidden, g);
        out.target_acc = accuracy(r.model, cells[job.cell]->heldout_target);
        out.result = std::move(r);
      } catch (const std::exception& e) {
        out.category = failure_category(e);
        out.message = e.what();
      }
      out.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  struct Indexed {
    ResultRow row;
    double ms;
  };
  std::vector<Indexed> collected;
  GridResult grid;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Job& job = jobs[j];
    const Outcome& out = outcomes[j];
    std::vector<std::size_t> steps =
        job.method == "gdo" ? std::vector<std::size_t>{job.inter_steps} : cfg.inter_steps_grid;
    for (std::size_t is : steps) {
      if (!out.result) {
        grid.failures.push_back({job.method, job.n_given, is, job.seed, out.category, out.message});
        continue;
      }
      ResultRow row;
      row.dataset = cfg.dataset.name;
      row.method = job.method;
      row.n_given = job.n_given;
      row.inter_steps = is;
      row.seed = job.seed;
      row.target_acc = out.target_acc;
      row.domain_acc = out.result->record.domain_accuracy;
      row.runtime_ms = cfg.record_runtime ? std::round(out.ms) : 0.0;
      row.fingerprint = cells[job.cell]->fingerprint;
      collected.push_back({std::move(row), out.ms});
    }
  }
  std::sort(collected.begin(), collected.end(),
            [](const Indexed& a, const Indexed& b) { return a.row.key() < b.row.key(); });
  auto fkey = [](const CellFailure& f) { return std::tie(f.method, f.n_given, f.inter_steps, f.seed); };
  std::sort(grid.failures.begin(), grid.failures.end(),
            [&](const CellFailure& a, const CellFailure& b) { return fkey(a) < fkey(b); });
  for (auto& c : collected) {
    grid.rows.push_back(std::move(c.row));
    grid.wall_ms.push_back(c.ms);
  }
  return grid;
}

}  // namespace gdo::harness
