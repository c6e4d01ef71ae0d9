#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gdo/harness/run.hpp"

using namespace gdo;
using namespace gdo::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  return config_from_json(json::parse(R"({
    "dataset": {"name": "two_moons", "n": 120, "total_shift": 60},
    "n_given_grid": [3],
    "inter_steps_grid": [0, 1],
    "methods": ["gdo", "gst", "source_only"],
    "seeds": [0, 1],
    "hidden": [8],
    "gdo": {"pretrain_epochs": 5, "m": 4, "epochs_per_step": 2}
  })"));
}

ResultRow row(const std::string& method, std::size_t seed, double acc) {
  ResultRow r;
  r.dataset = "two_moons";
  r.method = method;
  r.n_given = 6;
  r.inter_steps = 2;
  r.seed = seed;
  r.target_acc = acc;
  return r;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("gdo_harness_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, MinimalConfigTakesDefaults) {
  ExperimentConfig c = config_from_json(json::parse(R"({"dataset": {"name": "two_moons"}})"));
  ExperimentConfig d;
  EXPECT_EQ(c.dataset, d.dataset);
  EXPECT_EQ(c.gdo, d.gdo);
  EXPECT_EQ(c.n_given_grid, d.n_given_grid);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0}));
  EXPECT_EQ(c.hidden, (std::vector<std::size_t>{64, 64}));
  EXPECT_EQ(c.gdo.alpha, 0.1);
  EXPECT_EQ(c.gdo.beta, 0.1);
  EXPECT_EQ(c.gdo.m, 10u);
}

TEST(Config, MnistDefaults) {
  ExperimentConfig c = config_from_json(json::parse(R"({"dataset": {"name": "rotated_mnist"}})"));
  EXPECT_EQ(c.dataset.total_shift, 45.0);
  EXPECT_EQ(c.hidden, (std::vector<std::size_t>{256, 256}));
  EXPECT_EQ(config_from_json(json::parse(R"({"dataset": {"name": "color_shift_mnist"}})")).dataset.total_shift, 1.0);
}

TEST(Config, BundledExamplesParse) {
  const std::filesystem::path dir = "examples/gdo";
  if (!std::filesystem::exists(dir)) GTEST_SKIP() << "no examples directory";
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(parse_config(e.path())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 5u);
}

TEST(Config, MisspelledKeyIsNamed) {
  try {
    config_from_json(json::parse(R"({"dataset": {"name": "two_moons"}, "gdo": {"alpah": 0.5}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("alpah"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("gdo"), std::string::npos);
  }
  EXPECT_THROW(config_from_json(json::parse(R"({"dataset": {"name": "two_moons"}, "sedes": [1]})")), ConfigError);
}

TEST(Config, TypeMismatchNamesPath) {
  try {
    config_from_json(json::parse(R"({"dataset": {"name": "two_moons", "n": "many"}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("dataset.n"), std::string::npos);
  }
  try {
    config_from_json(json::parse(R"({"dataset": {"name": "two_moons"}, "seeds": [1, "x"]})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("seeds[1]"), std::string::npos);
  }
}

TEST(Config, InvariantsRejected) {
  auto bad = [](const char* text) { return config_from_json(json::parse(text)); };
  EXPECT_THROW(bad(R"({"dataset": {"name": "two_moons"}, "seeds": [1, 1]})"), ConfigError);
  EXPECT_THROW(bad(R"({"dataset": {"name": "two_moons"}, "n_given_grid": []})"), ConfigError);
  EXPECT_THROW(bad(R"({"dataset": {"name": "two_moons"}, "methods": ["dann"]})"), ConfigError);
  EXPECT_THROW(bad(R"({"dataset": {"name": "svhn"}})"), ConfigError);
  EXPECT_THROW(bad(R"({"dataset": {"name": "two_moons"}, "gdo": {"m": 0}})"), ConfigError);
}

TEST(Config, RoundTrip) {
  ExperimentConfig c = small_config();
  c.gdo.head_mode = HeadMode::joint;
  c.gdo.lr.epsilon = 0.125;
  ExperimentConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.gdo, c.gdo);
  EXPECT_EQ(back.dataset, c.dataset);
  EXPECT_EQ(back.theory, c.theory);
  EXPECT_EQ(back.seeds, c.seeds);
}

TEST(Config, MissingFileIsIoError) { EXPECT_THROW(parse_config("/nonexistent/config.json"), IoError); }

TEST(Aggregate, HandArithmetic) {
  Summary s = aggregate({row("gdo", 0, 0.8), row("gdo", 1, 0.9)});
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_NEAR(s.rows[0].mean, 85.0, 1e-12);
  EXPECT_NEAR(s.rows[0].sd, std::sqrt(50.0), 1e-12);
  EXPECT_NEAR(s.rows[0].hw, 1.96 * std::sqrt(50.0) / std::sqrt(2.0), 1e-12);
  EXPECT_EQ(s.rows[0].formatted(), "85.0 ± 9.8");
}

TEST(Aggregate, ConstantAndSingleSeed) {
  Summary same = aggregate({row("gst", 0, 0.7), row("gst", 1, 0.7), row("gst", 2, 0.7)});
  EXPECT_EQ(same.rows[0].hw, 0.0);
  EXPECT_FALSE(same.rows[0].single);
  Summary one = aggregate({row("gst", 0, 0.7)});
  EXPECT_EQ(one.rows[0].hw, 0.0);
  EXPECT_TRUE(one.rows[0].single);
  EXPECT_NE(summary_csv(one).find(",n=1\n"), std::string::npos);
}

TEST(Aggregate, EmptyCellWarnsAndInputsUntouched) {
  std::vector<ResultRow> rows{row("gdo", 0, 0.5)};
  const std::string before = results_csv(rows);
  Summary s = aggregate(rows, {{"gdo", 6, 2}, {"gst", 6, 2}});
  EXPECT_EQ(s.rows.size(), 1u);
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("gst"), std::string::npos);
  EXPECT_EQ(results_csv(rows), before);
}

TEST(Report, ResultsCsvRoundTripAndReaggregation) {
  std::vector<ResultRow> rows{row("gdo", 0, 0.8125), row("gdo", 1, 1.0 / 3.0), row("gst", 0, 0.1)};
  const std::string csv = results_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kResultsHeader);
  std::vector<ResultRow> back = parse_results_csv(csv);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].target_acc, 1.0 / 3.0);
  EXPECT_EQ(results_csv(back), csv);
  EXPECT_EQ(summary_csv(aggregate(back)), summary_csv(aggregate(rows)));
  EXPECT_THROW(parse_results_csv("nope\n"), FormatError);
  EXPECT_THROW(parse_results_csv(std::string(kResultsHeader) + "\na,b,1,2\n"), FormatError);
}

TEST(Report, AblationHasOneCellPerGridPoint) {
  std::vector<ResultRow> rows;
  for (std::size_t g : {2u, 4u, 6u})
    for (std::size_t is : {0u, 1u})
      for (std::uint64_t s : {0u, 1u}) {
        ResultRow r = row("gdo", s, 0.5 + 0.01 * static_cast<double>(g + is + s));
        r.n_given = g;
        r.inter_steps = is;
        rows.push_back(r);
      }
  AblationMatrix m = ablation_matrix(aggregate(rows), "gdo", {2, 4, 6}, {0, 1});
  std::size_t cells = 0;
  for (const auto& r : m.cells)
    for (const auto& c : r) cells += c != "-";
  EXPECT_EQ(cells, 6u);
  const std::string csv = ablation_csv(m);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n_given,inter_steps=0,inter_steps=1");
}

TEST(Report, BoundCsvMatchesRecomputation) {
  ExperimentConfig cfg = small_config();
  cfg.theory.t_max = 12;
  const std::string csv = bound_csv(cfg);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kBoundHeader);
  std::size_t T = 0;
  while (std::getline(in, line)) {
    ++T;
    auto c = split_csv_line(line);
    ASSERT_EQ(c.size(), 6u);
    EXPECT_EQ(std::stoul(c[0]), T);
    BoundParams p = bound_params(cfg, T);
    EXPECT_EQ(parse_number<double>(c[5], "bound"), error_bound(p));
  }
  EXPECT_EQ(T, 12u);
}

TEST(Grid, OneCellOneRow) {
  ExperimentConfig cfg = small_config();
  cfg.methods = {"gdo"};
  cfg.inter_steps_grid = {1};
  cfg.seeds = {3};
  GridResult g = run_grid(cfg);
  ASSERT_EQ(g.rows.size(), 1u);
  EXPECT_TRUE(g.failures.empty());
  EXPECT_GE(g.rows[0].target_acc, 0.0);
  EXPECT_LE(g.rows[0].target_acc, 1.0);
  EXPECT_EQ(g.rows[0].domain_acc.size(), 3u);
}

TEST(Grid, CanonicalOrderAndThreadIndependence) {
  ExperimentConfig cfg = small_config();
  GridResult a = run_grid(cfg, 1);
  GridResult b = run_grid(cfg, 3);
  ASSERT_EQ(a.rows.size(), 3u * 2u * 2u);
  EXPECT_EQ(results_csv(a.rows), results_csv(b.rows));
  for (std::size_t i = 1; i < a.rows.size(); ++i) EXPECT_LT(a.rows[i - 1].key(), a.rows[i].key());
  // Every method in a cell sees the same data.
  for (const auto& r : a.rows)
    for (const auto& o : a.rows)
      if (r.seed == o.seed && r.n_given == o.n_given) EXPECT_EQ(r.fingerprint, o.fingerprint);
  EXPECT_EQ(a.rows[0].runtime_ms, 0.0);
}

TEST(Grid, FailingCellsAreRecorded) {
  ExperimentConfig cfg = small_config();
  cfg.gdo.lr.gamma0 = 1e300;
  GridResult g = run_grid(cfg);
  EXPECT_TRUE(g.rows.empty());
  ASSERT_EQ(g.failures.size(), 12u);
  EXPECT_EQ(g.failures[0].category, "numeric");
}

TEST(Grid, MissingMnistIsConfigError) {
  ExperimentConfig cfg = config_from_json(json::parse(
      R"({"dataset": {"name": "rotated_mnist", "data_dir": "/nonexistent"}, "methods": ["source_only"]})"));
  EXPECT_THROW(run_grid(cfg), ConfigError);
}

TEST(Run, OutputFilesAreByteIdenticalAcrossReruns) {
  ExperimentConfig cfg = small_config();
  fs::path a = scratch("a"), b = scratch("b");
  run_and_write(cfg, a);
  run_and_write(cfg, b);
  for (const char* f : {"results.csv", "domain_acc.csv", "summary.csv"})
    EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;
  json manifest = json::parse(read_text(a / "manifest.json"));
  EXPECT_EQ(manifest["ci_method"], kCiMethod);
  EXPECT_EQ(manifest["config"], config_to_json(cfg));
  EXPECT_EQ(manifest["rows"], 12);
  // Re-aggregating saved rows reproduces the summary.
  Summary s = aggregate(parse_results_csv(read_text(a / "results.csv")), expected_cells(cfg));
  EXPECT_EQ(summary_csv(s), read_text(a / "summary.csv"));
  fs::remove_all(a.parent_path());
}
