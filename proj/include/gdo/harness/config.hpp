#pragma once

// Experiment configuration: strict JSON schema, defaults, and echo.
//
// {
//   "dataset": {"name": "two_moons", "n": 2000, "noise": 0.1, "total_shift": 120, ...},
//   "n_given_grid": [6], "inter_steps_grid": [2],
//   "methods": ["gdo", "gst", "source_only", "target_st"],
//   "seeds": [0, 1, 2, 3, 4],
//   "hidden": [64, 64],
//   "gdo": {"alpha": 0.1, "beta": 0.1, ...},
//   "theory": {"mu": 1.0, ...},
//   "output_dir": "results", "threads": 1, "record_runtime": false
// }
//
// Unknown keys anywhere are fatal.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdo/errors.hpp"
#include "gdo/gdo.hpp"

namespace gdo::harness {

using nlohmann::json;

inline const std::vector<std::string> kDatasets{"two_moons", "gaussians", "rotated_mnist", "color_shift_mnist"};
inline const std::vector<std::string> kMethods{"gdo", "gst", "source_only", "target_st"};

/// Environment variable that overrides dataset.data_dir.
inline constexpr const char* kDataDirEnv = "GDO_DATA_DIR";

struct DatasetSpec {
  std::string name = "two_moons";
  std::size_t n = 2000;              // training rows per domain
  double noise = 0.1;                // two_moons noise sd, gaussians blob sd
  double separation = 1.0;           // gaussians
  std::size_t classes = 2;           // gaussians
  double total_shift = 120.0;        // degrees, or color offset
  double holdout_fraction = 0.2;     // share of the target pool kept for evaluation only
  bool center = false;               // translate 2-D sets to zero mean before rotating
  std::string data_dir = "data/mnist-5k";
  std::string images = "images-idx3-ubyte.gz";
  std::string labels = "labels-idx1-ubyte.gz";

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct TheorySpec {
  double mu = 1.0;
  double sigma2 = 1.0;
  double delta = 0.05;
  double err0 = 1.0;
  double c = 0.1;
  std::size_t t_max = 50;
  std::size_t window = 10;

  friend bool operator==(const TheorySpec&, const TheorySpec&) = default;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<std::size_t> n_given_grid{6};
  std::vector<std::size_t> inter_steps_grid{2};
  std::vector<std::string> methods{"gdo", "gst", "source_only"};
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::size_t> hidden{64, 64};
  GdoConfig gdo;
  TheorySpec theory;
  std::string output_dir = "results";
  std::size_t threads = 1;
  bool record_runtime = false;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  if (!obj.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) throw ConfigError("unknown key \"" + key + "\" at " + join_path(path, key));
}

inline const char* type_name(const json& j) { return j.type_name(); }

template <typename T>
void read(const json& obj, const std::string& key, const std::string& path, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string where = join_path(path, key);
  const json& v = *it;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(where + ": expected boolean, got " + type_name(v));
    out = v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(where + ": expected string, got " + type_name(v));
    out = v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(where + ": expected number, got " + type_name(v));
    out = v.get<T>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      throw ConfigError(where + ": expected non-negative integer, got " + type_name(v));
    out = v.get<T>();
  } else {
    if (!v.is_array()) throw ConfigError(where + ": expected array, got " + type_name(v));
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      using E = typename T::value_type;
      json wrapper = json::object({{"v", v[i]}});
      E e{};
      read(wrapper, "v", where + "[" + std::to_string(i) + "]", e);
      out.push_back(e);
    }
  }
}

}  // namespace detail

inline HeadMode parse_head_mode(const std::string& s, const std::string& where) {
  if (s == "strict") return HeadMode::strict;
  if (s == "joint") return HeadMode::joint;
  throw ConfigError(where + ": expected \"strict\" or \"joint\", got \"" + s + "\"");
}

inline std::string to_string(HeadMode m) { return m == HeadMode::strict ? "strict" : "joint"; }

inline void validate(const ExperimentConfig& c) {
  if (std::find(kDatasets.begin(), kDatasets.end(), c.dataset.name) == kDatasets.end())
    throw ConfigError("dataset.name: unknown dataset \"" + c.dataset.name + "\"");
  if (c.n_given_grid.empty()) throw ConfigError("n_given_grid: must not be empty");
  if (c.inter_steps_grid.empty()) throw ConfigError("inter_steps_grid: must not be empty");
  if (c.methods.empty()) throw ConfigError("methods: must not be empty");
  if (c.seeds.empty()) throw ConfigError("seeds: must not be empty");
  for (std::size_t g : c.n_given_grid)
    if (g < 2) throw ConfigError("n_given_grid: every entry must be >= 2");
  for (const auto& m : c.methods)
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end())
      throw ConfigError("methods: unknown method \"" + m + "\"");
  std::set<std::uint64_t> distinct(c.seeds.begin(), c.seeds.end());
  if (distinct.size() != c.seeds.size()) throw ConfigError("seeds: entries must be distinct");
  std::set<std::string> mset(c.methods.begin(), c.methods.end());
  if (mset.size() != c.methods.size()) throw ConfigError("methods: entries must be distinct");
  if (!(c.dataset.holdout_fraction > 0.0 && c.dataset.holdout_fraction < 1.0))
    throw ConfigError("dataset.holdout_fraction: must lie in (0, 1)");
  if (c.dataset.n < 4) throw ConfigError("dataset.n: must be >= 4");
  if (c.threads == 0) throw ConfigError("threads: must be >= 1");
  if (c.theory.window == 0) throw ConfigError("theory.window: must be >= 1");
  if (c.theory.t_max == 0) throw ConfigError("theory.t_max: must be >= 1");
  try {
    validate(c.gdo);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("gdo: ") + e.what());
  }
}

inline ExperimentConfig config_from_json(const json& j) {
  using detail::read;
  detail::reject_unknown(j, {"dataset", "n_given_grid", "inter_steps_grid", "methods", "seeds", "hidden", "gdo",
                             "theory", "output_dir", "threads", "record_runtime"},
                         "");
  ExperimentConfig c;
  if (!j.contains("dataset")) throw ConfigError("dataset: required key missing");
  const json& d = j.at("dataset");
  detail::reject_unknown(d, {"name", "n", "noise", "separation", "classes", "total_shift", "holdout_fraction",
                             "center", "data_dir", "images", "labels"},
                         "dataset");
  if (!d.contains("name")) throw ConfigError("dataset.name: required key missing");
  read(d, "name", "dataset", c.dataset.name);
  if (c.dataset.name == "rotated_mnist") c.dataset.total_shift = 45.0;
  if (c.dataset.name == "color_shift_mnist") c.dataset.total_shift = 1.0;
  // 2000 training images and 1000 held-out target images
  if (c.dataset.name == "rotated_mnist" || c.dataset.name == "color_shift_mnist") c.dataset.holdout_fraction = 1.0 / 3.0;
  if (c.dataset.name == "rotated_mnist" || c.dataset.name == "color_shift_mnist") c.hidden = {256, 256};
  read(d, "n", "dataset", c.dataset.n);
  read(d, "noise", "dataset", c.dataset.noise);
  read(d, "separation", "dataset", c.dataset.separation);
  read(d, "classes", "dataset", c.dataset.classes);
  read(d, "total_shift", "dataset", c.dataset.total_shift);
  read(d, "holdout_fraction", "dataset", c.dataset.holdout_fraction);
  read(d, "center", "dataset", c.dataset.center);
  read(d, "data_dir", "dataset", c.dataset.data_dir);
  read(d, "images", "dataset", c.dataset.images);
  read(d, "labels", "dataset", c.dataset.labels);

  read(j, "n_given_grid", "", c.n_given_grid);
  read(j, "inter_steps_grid", "", c.inter_steps_grid);
  read(j, "methods", "", c.methods);
  read(j, "seeds", "", c.seeds);
  read(j, "hidden", "", c.hidden);
  read(j, "output_dir", "", c.output_dir);
  read(j, "threads", "", c.threads);
  read(j, "record_runtime", "", c.record_runtime);

  if (j.contains("gdo")) {
    const json& g = j.at("gdo");
    detail::reject_unknown(g, {"alpha", "beta", "m", "gamma0", "epsilon", "zeta", "epochs_per_step",
                               "pretrain_epochs", "head_mode", "inter_sample", "warmup_sample", "eval_sample",
                               "lambda_v", "weight_decay"},
                           "gdo");
    read(g, "alpha", "gdo", c.gdo.alpha);
    read(g, "beta", "gdo", c.gdo.beta);
    read(g, "m", "gdo", c.gdo.m);
    read(g, "gamma0", "gdo", c.gdo.lr.gamma0);
    read(g, "epsilon", "gdo", c.gdo.lr.epsilon);
    read(g, "zeta", "gdo", c.gdo.zeta);
    read(g, "epochs_per_step", "gdo", c.gdo.epochs_per_step);
    read(g, "pretrain_epochs", "gdo", c.gdo.pretrain_epochs);
    std::string mode = to_string(c.gdo.head_mode);
    read(g, "head_mode", "gdo", mode);
    c.gdo.head_mode = parse_head_mode(mode, "gdo.head_mode");
    read(g, "inter_sample", "gdo", c.gdo.inter_sample);
    read(g, "warmup_sample", "gdo", c.gdo.warmup_sample);
    read(g, "eval_sample", "gdo", c.gdo.eval_sample);
    read(g, "lambda_v", "gdo", c.gdo.lambda_v);
    read(g, "weight_decay", "gdo", c.gdo.weight_decay);
  }
  if (j.contains("theory")) {
    const json& t = j.at("theory");
    detail::reject_unknown(t, {"mu", "sigma2", "delta", "err0", "c", "t_max", "window"}, "theory");
    read(t, "mu", "theory", c.theory.mu);
    read(t, "sigma2", "theory", c.theory.sigma2);
    read(t, "delta", "theory", c.theory.delta);
    read(t, "err0", "theory", c.theory.err0);
    read(t, "c", "theory", c.theory.c);
    read(t, "t_max", "theory", c.theory.t_max);
    read(t, "window", "theory", c.theory.window);
  }
  validate(c);
  return c;
}

/// Full configuration with every default filled in.
inline json config_to_json(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  const auto& g = c.gdo;
  const auto& t = c.theory;
  return json{
      {"dataset",
       {{"name", d.name},
        {"n", d.n},
        {"noise", d.noise},
        {"separation", d.separation},
        {"classes", d.classes},
        {"total_shift", d.total_shift},
        {"holdout_fraction", d.holdout_fraction},
        {"center", d.center},
        {"data_dir", d.data_dir},
        {"images", d.images},
        {"labels", d.labels}}},
      {"n_given_grid", c.n_given_grid},
      {"inter_steps_grid", c.inter_steps_grid},
      {"methods", c.methods},
      {"seeds", c.seeds},
      {"hidden", c.hidden},
      {"gdo",
       {{"alpha", g.alpha},
        {"beta", g.beta},
        {"m", g.m},
        {"gamma0", g.lr.gamma0},
        {"epsilon", g.lr.epsilon},
        {"zeta", g.zeta},
        {"epochs_per_step", g.epochs_per_step},
        {"pretrain_epochs", g.pretrain_epochs},
        {"head_mode", to_string(g.head_mode)},
        {"inter_sample", g.inter_sample},
        {"warmup_sample", g.warmup_sample},
        {"eval_sample", g.eval_sample},
        {"lambda_v", g.lambda_v},
        {"weight_decay", g.weight_decay}}},
      {"theory",
       {{"mu", t.mu},
        {"sigma2", t.sigma2},
        {"delta", t.delta},
        {"err0", t.err0},
        {"c", t.c},
        {"t_max", t.t_max},
        {"window", t.window}}},
      {"output_dir", c.output_dir},
      {"threads", c.threads},
      {"record_runtime", c.record_runtime}};
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j);
}

/// Directory holding IDX files: GDO_DATA_DIR when set, else dataset.data_dir.
inline std::filesystem::path resolve_data_dir(const DatasetSpec& d) {
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return env;
  return d.data_dir;
}

}  // namespace gdo::harness
