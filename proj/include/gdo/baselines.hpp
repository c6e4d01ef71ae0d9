#pragma once

// Reference methods sharing the GDO seed protocol: source-only training,
// one-shot target self-training and gradual self-training (GST).

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>

#include "gdo/domains.hpp"
#include "gdo/gdo.hpp"
#include "gdo/losses.hpp"
#include "gdo/mlp.hpp"
#include "gdo/optim.hpp"

namespace gdo {

/// Supervised training on D_0. Identical to the pretraining stage of run_gdo.
inline MlpModel train_source(const DomainSequence& seq, std::span<const std::size_t> hidden,
                             const GdoConfig& cfg) {
  validate(cfg);
  if (seq.size() == 0 || !seq.source().labeled()) throw ContractError("source domain must be labeled");
  return pretrain_source(initial_model(seq, hidden, cfg), seq.source(), cfg);
}

struct SelfTrainResult {
  MlpModel model;
  Labels pseudo_labels;  // computed once from the input model
};

/// ST(C, D): pseudo-label D with the frozen input model, then minimize CE
/// against those fixed labels for m * epochs_per_step steps (m batches,
/// epochs_per_step steps each) at rate schedule_rate(lr, round).
inline SelfTrainResult self_train_detailed(const MlpModel& model, const Dataset& d, const GdoConfig& cfg,
                                           std::size_t round = 0) {
  validate(cfg);
  SelfTrainResult out{model, pseudo_labels(model, d.x)};
  const double rate = schedule_rate(cfg.lr, round);
  const std::size_t m = std::min(cfg.m, d.size());
  auto batches = batch_indices(d.size(), BatchPlan{m, derive_seed(cfg.seed, 0x5000 + round)});
  for (const auto& idx : batches) {
    DenseMatrix xb = gather_rows(d.x, idx);
    Labels yb(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = out.pseudo_labels[idx[i]];
    for (std::size_t e = 0; e < cfg.epochs_per_step; ++e) {
      LossBundle b = model_loss(out.model, xb, [&](const DenseMatrix& z) { return softmax_ce(z, yb); });
      add_weight_decay(b, out.model, cfg.weight_decay);
      out.model = sgd_step(out.model, b, rate, ParamBlock::both);
    }
  }
  return out;
}

inline MlpModel self_train_once(const MlpModel& model, const Dataset& d, const GdoConfig& cfg,
                                std::size_t round = 0) {
  return self_train_detailed(model, d, cfg, round).model;
}

inline RunRecord final_record(const DomainSequence& seq, const MlpModel& model) {
  RunRecord rec;
  rec.data_fingerprint = sequence_fingerprint(seq);
  for (const auto& d : seq.domains) rec.domain_accuracy.push_back(d.labeled() ? accuracy(model, d) : 0.0);
  return rec;
}

/// Source training followed by one self-training pass per domain D_1..D_n.
inline GdoResult gst(const DomainSequence& seq, std::span<const std::size_t> hidden, const GdoConfig& cfg) {
  check_sequence(seq);
  MlpModel model = train_source(seq, hidden, cfg);
  RunRecord rec;
  rec.steps.push_back(StepRecord{0, 0, 0.0, cfg.lr.gamma0, 0.0});
  for (std::size_t t = 1; t < seq.size(); ++t) {
    model = self_train_once(model, features_only(seq.domains[t]), cfg, t);
    rec.steps.push_back(StepRecord{t, t - 1, 1.0, schedule_rate(cfg.lr, t), 0.0});
  }
  RunRecord fin = final_record(seq, model);
  rec.domain_accuracy = std::move(fin.domain_accuracy);
  rec.data_fingerprint = fin.data_fingerprint;
  return GdoResult{std::move(model), std::move(rec)};
}

/// Source training followed by self-training directly on the target.
inline GdoResult target_self_train(const DomainSequence& seq, std::span<const std::size_t> hidden,
                                   const GdoConfig& cfg) {
  check_sequence(seq);
  MlpModel model = train_source(seq, hidden, cfg);
  model = self_train_once(model, features_only(seq.target()), cfg, 1);
  RunRecord rec = final_record(seq, model);
  return GdoResult{std::move(model), std::move(rec)};
}

inline GdoResult source_only(const DomainSequence& seq, std::span<const std::size_t> hidden,
                             const GdoConfig& cfg) {
  check_sequence(seq);
  MlpModel model = train_source(seq, hidden, cfg);
  RunRecord rec = final_record(seq, model);
  return GdoResult{std::move(model), std::move(rec)};
}

}  // namespace gdo
