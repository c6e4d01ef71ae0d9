#pragma once

// Writes one grid run to an output directory: results.csv, domain_acc.csv,
// summary.csv and manifest.json. Only the manifest carries timestamps.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "gdo/harness/config.hpp"
#include "gdo/harness/experiment.hpp"
#include "gdo/harness/report.hpp"

namespace gdo::harness {

inline constexpr const char* kVersion = "0.1.0";

inline std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json versions_json() {
  return json{{"gdo", kVersion},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"compiler", __VERSION__},
              {"cxx", __cplusplus}};
}

inline json manifest_json(const ExperimentConfig& cfg, const GridResult& grid, const Summary& summary,
                          const std::string& started, std::size_t threads) {
  json failures = json::array();
  for (const auto& f : grid.failures)
    failures.push_back({{"method", f.method},
                        {"n_given", f.n_given},
                        {"inter_steps", f.inter_steps},
                        {"seed", f.seed},
                        {"category", f.category},
                        {"message", f.message}});
  json timings = json::array();
  for (std::size_t i = 0; i < grid.rows.size(); ++i) {
    const auto& r = grid.rows[i];
    timings.push_back({{"method", r.method},
                       {"n_given", r.n_given},
                       {"inter_steps", r.inter_steps},
                       {"seed", r.seed},
                       {"wall_ms", grid.wall_ms[i]},
                       {"fingerprint", r.fingerprint}});
  }
  return json{{"config", config_to_json(cfg)},
              {"versions", versions_json()},
              {"ci_method", kCiMethod},
              {"started_at", started},
              {"finished_at", utc_timestamp()},
              {"threads", threads},
              {"rows", grid.rows.size()},
              {"failures", failures},
              {"warnings", summary.warnings},
              {"timings", timings}};
}

struct RunOutputs {
  GridResult grid;
  Summary summary;
};

inline RunOutputs run_and_write(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                std::size_t threads = 0) {
  const std::string started = utc_timestamp();
  if (threads == 0) threads = cfg.threads;
  RunOutputs out;
  out.grid = run_grid(cfg, threads);
  out.summary = aggregate(out.grid.rows, expected_cells(cfg));
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "results.csv", results_csv(out.grid.rows));
  write_text(out_dir / "domain_acc.csv", domain_acc_csv(out.grid.rows));
  write_text(out_dir / "summary.csv", summary_csv(out.summary));
  write_text(out_dir / "manifest.json", manifest_json(cfg, out.grid, out.summary, started, threads).dump(2) + "\n");
  return out;
}

}  // namespace gdo::harness
