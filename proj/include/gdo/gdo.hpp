#pragma once

// Gradual Domain Osmosis: lambda-interpolated self-training across a domain
// sequence with per-batch feature-extractor updates (theta) and per-transition
// classifier-head updates (phi).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "gdo/domains.hpp"
#include "gdo/errors.hpp"
#include "gdo/losses.hpp"
#include "gdo/mlp.hpp"
#include "gdo/optim.hpp"

namespace gdo {

/// strict: phi moves only at domain transitions.
/// joint: theta and phi are both updated by the intra-domain objective.
enum class HeadMode { strict, joint };

struct GdoConfig {
  double alpha = 0.1;                  // margin weight
  double beta = 0.1;                   // KL weight; 0 gives the plain ce + alpha*margin objective
  std::size_t inter_steps = 2;         // lambda grid points strictly inside (0, 1)
  std::size_t m = 10;                  // batches per domain
  LrSchedule lr{0.05, 0.01};
  double zeta = 0.001;                 // transition step size for phi
  std::size_t epochs_per_step = 5;     // gradient steps per batch pair
  std::size_t pretrain_epochs = 200;   // passes over the source batches
  HeadMode head_mode = HeadMode::strict;
  std::size_t inter_sample = 256;      // points for the transition Jacobian loss
  std::size_t warmup_sample = 32;      // points of the next batch for warm-up values
  std::size_t eval_sample = 512;       // points for per-batch error tracking
  double lambda_v = 1.0;               // drift weight in the Lyapunov value
  double weight_decay = 0.0;           // L2 on weights in every training loss; 0 disables
  std::uint64_t seed = 0;

  friend bool operator==(const GdoConfig&, const GdoConfig&) = default;
};

inline void validate(const GdoConfig& cfg) {
  if (!(cfg.alpha >= 0.0)) throw ArgumentError("alpha must be >= 0");
  if (!(cfg.beta >= 0.0)) throw ArgumentError("beta must be >= 0");
  if (cfg.m == 0) throw ArgumentError("m must be >= 1");
  if (!(cfg.lr.gamma0 >= 0.0)) throw ArgumentError("gamma0 must be >= 0");
  if (!(cfg.lr.epsilon >= 0.0)) throw ArgumentError("epsilon must be >= 0");
  if (!(cfg.zeta >= 0.0)) throw ArgumentError("zeta must be >= 0");
  if (cfg.epochs_per_step == 0) throw ArgumentError("epochs_per_step must be >= 1");
  if (!(cfg.weight_decay >= 0.0)) throw ArgumentError("weight_decay must be >= 0");
  if (cfg.inter_sample == 0) throw ArgumentError("inter_sample must be >= 1");
  if (cfg.eval_sample == 0) throw ArgumentError("eval_sample must be >= 1");
}

/// {j/(inter_steps+1) : j = 1..inter_steps} followed by exactly 1.
inline std::vector<double> lambda_grid(std::size_t inter_steps) {
  std::vector<double> grid;
  for (std::size_t j = 1; j <= inter_steps; ++j)
    grid.push_back(static_cast<double>(j) / static_cast<double>(inter_steps + 1));
  grid.push_back(1.0);
  return grid;
}

/// (n_given - 1) * (inter_steps + 1) + 1: one source step plus one step per
/// lambda value of every domain pair.
inline std::size_t total_outer_steps(std::size_t n_given, std::size_t inter_steps) {
  if (n_given < 1) throw ArgumentError("n_given must be >= 1");
  return (n_given - 1) * (inter_steps + 1) + 1;
}

// ------------------------------------------------------------------ records

/// One lambda step (or the source pretraining step at index 0).
struct StepRecord {
  std::size_t outer_step = 0;
  std::size_t pair = 0;  // adapting from domain `pair` to `pair + 1`
  double lambda = 0.0;
  double rate = 0.0;
  double mean_loss = 0.0;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// One batch update: Err_{t,k} on domain t, squared drift of the parameters the
/// intra update writes, their Lyapunov combination and the warm-up L_inter value.
struct BatchRecord {
  std::size_t t = 0;
  std::size_t k = 0;
  double lambda = 0.0;
  double loss = 0.0;
  double err = 0.0;
  double theta_drift_sq = 0.0;
  double lyapunov = 0.0;
  double warmup_inter = 0.0;

  friend bool operator==(const BatchRecord&, const BatchRecord&) = default;
};

struct TransitionRecord {
  std::size_t from = 0;
  double inter_before = 0.0;
  double inter_after = 0.0;

  friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

struct RunRecord {
  std::vector<StepRecord> steps;
  std::vector<BatchRecord> batches;
  std::vector<TransitionRecord> transitions;
  std::vector<double> domain_accuracy;  // final model on every domain's oracle labels
  std::uint64_t data_fingerprint = 0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Model C^{(t,k)}, the frozen reference used for pseudo-labels and KL, the
/// (t, k) coordinates and the schedule index.
struct TrainState {
  MlpModel model;
  MlpModel ref_model;
  std::size_t t = 0;
  std::size_t k = 0;
  std::size_t outer_step = 0;
  RunRecord trajectory;
};

// ------------------------------------------------------------------ helpers

/// FNV-1a over every feature and label of every domain.
inline std::uint64_t sequence_fingerprint(const DomainSequence& seq) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Dataset& d = seq.domains[i];
    mix(d.x.data().data(), d.x.size() * sizeof(double));
    if (d.y)
      for (std::size_t l : *d.y) {
        auto v = static_cast<std::uint64_t>(l);
        mix(&v, sizeof v);
      }
    mix(&seq.shift_param[i], sizeof(double));
  }
  return h;
}

/// Mixes run seed and a stream tag into an independent seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

/// Seeded sample of at most `count` row indices, returned in ascending order.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (count >= n) return idx;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline double accuracy(const MlpModel& model, const Dataset& labeled) {
  if (!labeled.y) throw ContractError("accuracy needs oracle labels");
  if (labeled.size() == 0) throw ArgumentError("accuracy of an empty dataset");
  Labels pred = argmax_rows(forward(model, labeled.x));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == (*labeled.y)[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("parameter vectors differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// --------------------------------------------------------------- operations

/// Hard pseudo-labels: per-row argmax of the logits, ties to the lowest index.
inline Labels pseudo_labels(const MlpModel& model, const DenseMatrix& x) {
  return argmax_rows(forward(model, x));
}

/// (1-lambda) CE(batch_i) + lambda CE(batch_next) + alpha margin(batch_next)
/// + beta KL(model || ref on batch_i and batch_next), pseudo-labels from ref.
/// Terms with zero weight are skipped entirely.
inline LossBundle weighted_st_objective(const MlpModel& model, const MlpModel& ref_model,
                                        const Dataset& batch_i, const Dataset& batch_next,
                                        double lambda, const GdoConfig& cfg) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ArgumentError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  const std::size_t ni = batch_i.size();
  const std::size_t nn = batch_next.size();
  const double w_i = 1.0 - lambda;
  const double w_n = lambda;
  const bool use_i = w_i > 0.0 || cfg.beta > 0.0;
  const bool use_n = w_n > 0.0 || cfg.alpha > 0.0 || cfg.beta > 0.0;

  DenseMatrix x;
  std::size_t off_n = 0;
  if (use_i && use_n) {
    x = vstack(batch_i.x, batch_next.x);
    off_n = ni;
  } else if (use_i) {
    x = batch_i.x;
  } else {
    x = batch_next.x;
  }

  ForwardCache cache = forward_cached(model, x);
  DenseMatrix ref_logits = forward(ref_model, x);
  Labels pl = argmax_rows(ref_logits);
  const std::size_t k = cache.logits.cols();
  DenseMatrix grad(x.rows(), k);
  double value = 0.0;

  auto rows = [](const DenseMatrix& m, std::size_t begin, std::size_t count) {
    std::vector<double> d(m.data().begin() + static_cast<std::ptrdiff_t>(begin * m.cols()),
                          m.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * m.cols()));
    return DenseMatrix(count, m.cols(), std::move(d));
  };
  auto add_grad = [&grad](const DenseMatrix& g, std::size_t begin, double w) {
    for (std::size_t i = 0; i < g.size(); ++i) grad.data()[begin * grad.cols() + i] += w * g.data()[i];
  };
  auto labels_of = [&pl](std::size_t begin, std::size_t count) {
    return Labels(pl.begin() + static_cast<std::ptrdiff_t>(begin),
                  pl.begin() + static_cast<std::ptrdiff_t>(begin + count));
  };

  if (w_i > 0.0 && ni > 0) {
    LogitLoss ce = softmax_ce(rows(cache.logits, 0, ni), labels_of(0, ni));
    value += w_i * ce.value;
    add_grad(ce.d_logits, 0, w_i);
  }
  if (use_n && nn > 0) {
    DenseMatrix zn = rows(cache.logits, off_n, nn);
    if (w_n > 0.0) {
      LogitLoss ce = softmax_ce(zn, labels_of(off_n, nn));
      value += w_n * ce.value;
      add_grad(ce.d_logits, off_n, w_n);
    }
    if (cfg.alpha > 0.0) {
      LogitLoss mg = margin_loss(zn);
      value += cfg.alpha * mg.value;
      add_grad(mg.d_logits, off_n, cfg.alpha);
    }
  }
  if (cfg.beta > 0.0 && x.rows() > 0) {
    LogitLoss kl = kl_to_reference(cache.logits, ref_logits);
    value += cfg.beta * kl.value;
    add_grad(kl.d_logits, 0, cfg.beta);
  }
  return LossBundle{value, backprop(model, cache, grad)};
}

/// Block written by intra-domain updates under `mode`.
inline ParamBlock intra_block(HeadMode mode) {
  return mode == HeadMode::strict ? ParamBlock::theta : ParamBlock::both;
}

/// Parameters written by intra-domain updates, flattened.
inline std::vector<double> intra_params(const MlpModel& model, HeadMode mode) {
  return mode == HeadMode::strict ? flatten_theta(model.theta) : flatten(model);
}

/// epochs_per_step descent steps on the weighted objective at `lambda`, with
/// rate eta_t = schedule_rate(lr, outer_step). Advances k and appends a
/// BatchRecord; `eval` (labeled, may be empty) supplies Err_{t,k}.
inline TrainState intra_update(TrainState state, const Dataset& batch_i, const Dataset& batch_next,
                               double lambda, const GdoConfig& cfg, const Dataset* eval = nullptr) {
  const double rate = schedule_rate(cfg.lr, state.outer_step);
  const ParamBlock block = intra_block(cfg.head_mode);
  const std::vector<double> before = intra_params(state.model, cfg.head_mode);
  double loss = 0.0;
  for (std::size_t e = 0; e < cfg.epochs_per_step; ++e) {
    LossBundle b = weighted_st_objective(state.model, state.ref_model, batch_i, batch_next, lambda, cfg);
    add_weight_decay(b, state.model, cfg.weight_decay);
    state.model = sgd_step(state.model, b, rate, block);
    loss += b.value;
  }
  BatchRecord rec;
  rec.t = state.t;
  rec.k = state.k;
  rec.lambda = lambda;
  rec.loss = loss / static_cast<double>(cfg.epochs_per_step);
  rec.theta_drift_sq = squared_distance(intra_params(state.model, cfg.head_mode), before);
  if (eval && eval->labeled() && eval->size() > 0) rec.err = 1.0 - accuracy(state.model, *eval);
  rec.lyapunov = rec.err + cfg.lambda_v * rec.theta_drift_sq;
  state.trajectory.batches.push_back(rec);
  ++state.k;
  return state;
}

/// Incremental operator for one batch pair: pseudo-label CE on B_tk, margin on
/// B_tk1, KL to the reference; afterwards the reference becomes the updated model.
inline TrainState phi_operator(TrainState state, const Dataset& b_tk, const Dataset& b_tk1,
                               const GdoConfig& cfg) {
  state = intra_update(std::move(state), b_tk, b_tk1, 0.0, cfg);
  state.ref_model = state.model;
  return state;
}

/// Transition step phi <- phi - zeta * grad_phi E[|dC/dx|^2] over a seeded
/// subsample of D_t and D_t1. Theta is untouched. Advances t and resets k.
inline TrainState inter_transfer(TrainState state, const Dataset& d_t, const Dataset& d_t1,
                                 const GdoConfig& cfg) {
  DenseMatrix pool = vstack(d_t.x, d_t1.x);
  auto idx = sample_indices(pool.rows(), cfg.inter_sample, derive_seed(cfg.seed, 0x1000 + state.t));
  DenseMatrix xs = gather_rows(pool, idx);
  LossBundle b = input_jacobian_sqnorm(state.model, xs);
  TransitionRecord rec{state.t, b.value, b.value};
  state.model = sgd_step(state.model, b, cfg.zeta, ParamBlock::phi);
  rec.inter_after = input_jacobian_sqnorm(state.model, xs).value;
  state.trajectory.transitions.push_back(rec);
  ++state.t;
  state.k = 0;
  return state;
}

/// Supervised cross-entropy training on the labeled source, both blocks,
/// constant rate gamma0, batches reshuffled every epoch.
inline MlpModel pretrain_source(MlpModel model, const Dataset& source, const GdoConfig& cfg) {
  if (!source.labeled()) throw ContractError("source domain must be labeled");
  const double rate = cfg.lr.gamma0;
  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    BatchPlan plan{std::min(cfg.m, source.size()), derive_seed(cfg.seed, 0x2000 + epoch)};
    for (const auto& idx : batch_indices(source.size(), plan)) {
      Dataset batch = subset(source, idx);
      LossBundle b = model_loss(model, batch.x, [&](const DenseMatrix& z) { return softmax_ce(z, *batch.y); });
      add_weight_decay(b, model, cfg.weight_decay);
      model = sgd_step(model, b, rate, ParamBlock::both);
    }
  }
  return model;
}

/// {input, hidden..., classes} for a sequence and hidden sizes.
inline std::vector<std::size_t> architecture(const DomainSequence& seq, std::span<const std::size_t> hidden) {
  std::vector<std::size_t> sizes{seq.source().dim()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(seq.source().num_classes);
  return sizes;
}

inline MlpModel initial_model(const DomainSequence& seq, std::span<const std::size_t> hidden,
                              const GdoConfig& cfg) {
  return init_mlp(std::span<const std::size_t>(architecture(seq, hidden)), derive_seed(cfg.seed, 0x3000));
}

inline void check_sequence(const DomainSequence& seq) {
  if (seq.size() < 2) throw ArgumentError("domain sequence needs at least 2 domains");
  if (!seq.source().labeled()) throw ContractError("source domain must be labeled");
  for (const auto& d : seq.domains) {
    validate(d);
    if (d.dim() != seq.source().dim()) throw ShapeError("domains differ in feature dimension");
  }
}

struct GdoResult {
  MlpModel model;
  RunRecord record;
};

/// Oracle-labeled evaluation subsample of one domain for Err tracking.
inline Dataset eval_subset(const Dataset& d, const GdoConfig& cfg, std::size_t domain) {
  if (!d.labeled()) return Dataset{};
  auto idx = sample_indices(d.size(), cfg.eval_sample, derive_seed(cfg.seed, 0x4000 + domain));
  return subset(d, idx);
}

/// Full run: supervised pretraining on D_0, then for each consecutive pair a
/// lambda sweep of m batch-pair intra updates (reference snapshot after every
/// lambda step) closed by one inter-domain transfer of phi.
inline GdoResult run_gdo(const DomainSequence& seq, std::span<const std::size_t> hidden,
                         const GdoConfig& cfg) {
  validate(cfg);
  check_sequence(seq);

  TrainState state;
  state.model = pretrain_source(initial_model(seq, hidden, cfg), seq.source(), cfg);
  state.ref_model = state.model;
  state.trajectory.data_fingerprint = sequence_fingerprint(seq);
  state.trajectory.steps.push_back(StepRecord{0, 0, 0.0, cfg.lr.gamma0, 0.0});

  const std::vector<double> grid = lambda_grid(cfg.inter_steps);
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    // Training only ever sees features beyond the source.
    const Dataset cur = i == 0 ? seq.domains[0] : features_only(seq.domains[i]);
    const Dataset next = features_only(seq.domains[i + 1]);
    const Dataset eval = eval_subset(seq.domains[i + 1], cfg, i + 1);
    state.t = i + 1;
    for (double lambda : grid) {
      ++state.outer_step;
      const std::size_t m = std::min({cfg.m, cur.size(), next.size()});
      auto bi = batch_indices(cur.size(), BatchPlan{m, derive_seed(cfg.seed, (state.outer_step << 8) | 1)});
      auto bn = batch_indices(next.size(), BatchPlan{m, derive_seed(cfg.seed, (state.outer_step << 8) | 2)});
      state.k = 0;
      double loss_sum = 0.0;
      for (std::size_t kb = 0; kb < m; ++kb) {
        Dataset batch_i = features_only(subset(cur, bi[kb]));
        Dataset batch_n = subset(next, bn[kb]);
        try {
          state = intra_update(std::move(state), batch_i, batch_n, lambda, cfg, &eval);
        } catch (const NumericError& e) {
          throw NumericError(std::string(e.what()) + " at (t=" + std::to_string(i + 1) +
                             ", lambda=" + std::to_string(lambda) + ", k=" + std::to_string(kb) + ")");
        }
        // Warm-up: gradient-alignment value on the upcoming batch.
        const auto& upcoming = bn[(kb + 1) % m];
        auto w = std::span(upcoming).first(std::min(cfg.warmup_sample, upcoming.size()));
        state.trajectory.batches.back().warmup_inter =
            input_jacobian_sqnorm(state.model, gather_rows(next.x, w)).value;
        loss_sum += state.trajectory.batches.back().loss;
      }
      state.ref_model = state.model;
      state.trajectory.steps.push_back(StepRecord{state.outer_step, i, lambda,
                                                  schedule_rate(cfg.lr, state.outer_step),
                                                  loss_sum / static_cast<double>(m)});
    }
    state.t = i;
    state = inter_transfer(std::move(state), cur, next, cfg);
    state.ref_model = state.model;
  }
  for (const auto& d : seq.domains)
    state.trajectory.domain_accuracy.push_back(d.labeled() ? accuracy(state.model, d) : 0.0);
  return GdoResult{std::move(state.model), std::move(state.trajectory)};
}

}  // namespace gdo
