#include <gtest/gtest.h>

#include <algorithm>

#include "gdo/baselines.hpp"

using namespace gdo;

namespace {

const std::vector<std::size_t> kHidden{16, 16};

DomainSequence blob_sequence(std::size_t n, double angle, std::size_t n_given, std::uint64_t seed) {
  return build_sequence(make_gaussians(n, 2, 4.0, 0.5, seed), Transform{TransformKind::rotate2d}, angle, n_given);
}

DomainSequence moons_sequence(std::size_t n, double angle, std::size_t n_given, std::uint64_t seed) {
  return build_sequence(make_two_moons(n, 0.1, seed), Transform{TransformKind::rotate2d}, angle, n_given);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST(TrainSource, SeparableBlobsFitNearlyPerfectly) {
  DomainSequence seq = blob_sequence(400, 30.0, 2, 1);
  GdoConfig cfg;
  cfg.pretrain_epochs = 50;
  EXPECT_GE(accuracy(train_source(seq, kHidden, cfg), seq.source()), 0.99);
}

TEST(TrainSource, ZeroEpochsReturnsInitialModel) {
  DomainSequence seq = blob_sequence(50, 30.0, 2, 1);
  GdoConfig cfg;
  cfg.pretrain_epochs = 0;
  EXPECT_EQ(flatten(train_source(seq, kHidden, cfg)), flatten(initial_model(seq, kHidden, cfg)));
}

TEST(TrainSource, DeterministicAndNeedsLabels) {
  DomainSequence seq = moons_sequence(100, 30.0, 2, 2);
  GdoConfig cfg;
  cfg.pretrain_epochs = 10;
  EXPECT_EQ(flatten(train_source(seq, kHidden, cfg)), flatten(train_source(seq, kHidden, cfg)));
  cfg.seed = 9;
  EXPECT_NE(flatten(train_source(seq, kHidden, GdoConfig{})), flatten(train_source(seq, kHidden, cfg)));
  seq.domains[0] = features_only(seq.domains[0]);
  EXPECT_THROW(train_source(seq, kHidden, cfg), ContractError);
}

TEST(SelfTrain, CorrectPseudoLabelsDoNotHurt) {
  DomainSequence seq = blob_sequence(400, 10.0, 2, 3);
  GdoConfig cfg;
  cfg.pretrain_epochs = 50;
  MlpModel model = train_source(seq, kHidden, cfg);
  ASSERT_EQ(accuracy(model, seq.target()), 1.0);
  MlpModel after = self_train_once(model, features_only(seq.target()), cfg);
  EXPECT_GE(accuracy(after, seq.target()), 0.99);
}

TEST(SelfTrain, ZeroRateKeepsModelButComputesLabels) {
  DomainSequence seq = moons_sequence(80, 40.0, 2, 4);
  GdoConfig cfg;
  cfg.pretrain_epochs = 3;
  MlpModel model = train_source(seq, kHidden, cfg);
  cfg.lr = LrSchedule{0.0, 0.0};
  Dataset d = features_only(seq.target());
  SelfTrainResult r = self_train_detailed(model, d, cfg);
  EXPECT_EQ(flatten(r.model), flatten(model));
  EXPECT_EQ(r.pseudo_labels, pseudo_labels(model, d.x));
}

TEST(SelfTrain, LabelsFrozenFromInputModel) {
  DomainSequence seq = moons_sequence(300, 60.0, 2, 5);
  GdoConfig cfg;
  cfg.pretrain_epochs = 3;
  cfg.lr.gamma0 = 0.5;
  cfg.epochs_per_step = 20;
  MlpModel model = train_source(seq, kHidden, cfg);
  Dataset d = features_only(seq.target());
  SelfTrainResult r = self_train_detailed(model, d, cfg);
  EXPECT_EQ(r.pseudo_labels, pseudo_labels(model, d.x));
  // The model moved enough that refreshed labels would differ.
  EXPECT_NE(pseudo_labels(r.model, d.x), r.pseudo_labels);
}

TEST(Gst, TwoDomainsEqualsTargetSelfTraining) {
  DomainSequence seq = moons_sequence(120, 50.0, 2, 6);
  GdoConfig cfg;
  cfg.pretrain_epochs = 5;
  GdoResult a = gst(seq, kHidden, cfg);
  GdoResult b = target_self_train(seq, kHidden, cfg);
  EXPECT_EQ(flatten(a.model), flatten(b.model));
  EXPECT_EQ(a.record.domain_accuracy, b.record.domain_accuracy);
  EXPECT_EQ(a.record.steps.size(), total_outer_steps(2, 0));
}

TEST(Gst, OneStepPerDomain) {
  DomainSequence seq = moons_sequence(120, 50.0, 5, 7);
  GdoConfig cfg;
  cfg.pretrain_epochs = 2;
  GdoResult r = gst(seq, kHidden, cfg);
  ASSERT_EQ(r.record.steps.size(), 5u);
  for (std::size_t t = 1; t < 5; ++t) EXPECT_EQ(r.record.steps[t].rate, schedule_rate(cfg.lr, t));
}

TEST(Baselines, ShareSequenceFingerprintAndSourceModel) {
  DomainSequence seq = moons_sequence(100, 50.0, 3, 8);
  GdoConfig cfg;
  cfg.pretrain_epochs = 4;
  const std::uint64_t fp = sequence_fingerprint(seq);
  EXPECT_EQ(gst(seq, kHidden, cfg).record.data_fingerprint, fp);
  EXPECT_EQ(source_only(seq, kHidden, cfg).record.data_fingerprint, fp);
  EXPECT_EQ(target_self_train(seq, kHidden, cfg).record.data_fingerprint, fp);
  EXPECT_EQ(run_gdo(seq, kHidden, cfg).record.data_fingerprint, fp);
  // GDO pretraining and the source-only baseline are the same computation.
  MlpModel pre = pretrain_source(initial_model(seq, kHidden, cfg), seq.source(), cfg);
  EXPECT_EQ(flatten(pre), flatten(source_only(seq, kHidden, cfg).model));
}

TEST(Baselines, GradualBeatsDirectOnRotatedMoons) {
  const std::vector<std::size_t> hidden{64, 64};
  std::vector<double> g, direct;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DomainSequence seq = moons_sequence(1000, 120.0, 6, seed);
    GdoConfig cfg;
    cfg.seed = seed;
    g.push_back(gst(seq, hidden, cfg).record.domain_accuracy.back());
    direct.push_back(target_self_train(seq, hidden, cfg).record.domain_accuracy.back());
  }
  EXPECT_GT(median(g), median(direct));
}
