// gdo: experiment driver.
//
//   gdo run <config> [--out DIR] [--threads N]
//   gdo ablate <config> [--out DIR] [--threads N] [--method M]
//   gdo theory <config> [--out DIR]
//   gdo data fetch-mnist --dir DIR [--base-url URL] [--offline]
//   gdo report <results.csv> [--out FILE]
//
// Exit codes: 0 ok, 1 runtime failure, 2 configuration or usage error.
// Failures print one line on stderr: "error: <category>: <message>".

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fetch_mnist.hpp"
#include "gdo/harness/run.hpp"

namespace fs = std::filesystem;
using namespace gdo;
using namespace gdo::harness;

namespace {

struct Exit {
  int code;
  std::string category;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& category, const std::string& message) {
  throw Exit{code, category, message};
}

ExperimentConfig load_config(const std::string& path) {
  if (!fs::exists(path)) fail(2, "config-not-found", path);
  try {
    return parse_config(path);
  } catch (const ConfigError& e) {
    fail(2, "config-invalid", e.what());
  } catch (const IoError& e) {
    fail(2, "config-not-found", e.what());
  }
}

fs::path output_dir(const ExperimentConfig& cfg, const std::string& flag) {
  return flag.empty() ? fs::path(cfg.output_dir) : fs::path(flag);
}

RunOutputs run_grid_checked(const ExperimentConfig& cfg, const fs::path& out, std::size_t threads) {
  RunOutputs r;
  try {
    r = run_and_write(cfg, out, threads);
  } catch (const ConfigError& e) {
    fail(2, "config-invalid", e.what());
  }
  return r;
}

void print_summary(const Summary& s) {
  std::printf("%-12s %8s %12s %4s  %s\n", "method", "n_given", "inter_steps", "n", "target acc %");
  for (const auto& r : s.rows)
    std::printf("%-12s %8zu %12zu %4zu  %s%s\n", r.method.c_str(), r.n_given, r.inter_steps, r.n,
                r.formatted().c_str(), r.single ? " (n=1)" : "");
  for (const auto& w : s.warnings) std::printf("warning: %s\n", w.c_str());
}

int finish_run(const RunOutputs& r, const fs::path& out) {
  print_summary(r.summary);
  std::printf("wrote %s\n", (out / "results.csv").string().c_str());
  if (!r.grid.failures.empty()) {
    const auto& f = r.grid.failures.front();
    fail(1, "cell-failure",
         std::to_string(r.grid.failures.size()) + " cell(s) failed; first: method=" + f.method +
             " n_given=" + std::to_string(f.n_given) + " inter_steps=" + std::to_string(f.inter_steps) +
             " seed=" + std::to_string(f.seed) + " [" + f.category + "] " + f.message);
  }
  return 0;
}

int cmd_run(const std::string& config, const std::string& out_flag, std::size_t threads) {
  ExperimentConfig cfg = load_config(config);
  fs::path out = output_dir(cfg, out_flag);
  return finish_run(run_grid_checked(cfg, out, threads), out);
}

int cmd_ablate(const std::string& config, const std::string& out_flag, std::size_t threads,
               std::string method) {
  ExperimentConfig cfg = load_config(config);
  fs::path out = output_dir(cfg, out_flag);
  if (method.empty())
    method = std::find(cfg.methods.begin(), cfg.methods.end(), "gdo") != cfg.methods.end() ? "gdo"
                                                                                           : cfg.methods.front();
  if (std::find(cfg.methods.begin(), cfg.methods.end(), method) == cfg.methods.end())
    fail(2, "config-invalid", "method \"" + method + "\" is not in the config's methods");
  RunOutputs r = run_grid_checked(cfg, out, threads);
  AblationMatrix m = ablation_matrix(r.summary, method, cfg.n_given_grid, cfg.inter_steps_grid);
  write_text(out / "ablation.csv", ablation_csv(m));
  std::printf("%s\n", ablation_markdown(m).c_str());
  return finish_run(r, out);
}

int cmd_theory(const std::string& config, const std::string& out_flag) {
  ExperimentConfig cfg = load_config(config);
  fs::path out = output_dir(cfg, out_flag);
  std::optional<Dataset> mnist;
  try {
    if (is_mnist(cfg.dataset)) mnist = load_mnist(cfg.dataset);
  } catch (const ConfigError& e) {
    fail(2, "config-invalid", e.what());
  }
  GdoConfig g = cfg.gdo;
  g.seed = cfg.seeds.front();
  g.inter_steps = cfg.inter_steps_grid.front();
  CellData cell = prepare_cell(cfg, cfg.n_given_grid.front(), g.seed, mnist ? &*mnist : nullptr);
  GdoResult res = run_gdo(cell.seq, cfg.hidden, g);
  LyapunovTrace trace = lyapunov_trace(res.record, g.lambda_v);
  DriftReport rep = drift_report(trace, cfg.theory.window);
  write_text(out / "lyapunov.csv", lyapunov_csv(trace));
  write_text(out / "drift_report.csv", drift_report_csv(rep, cfg.theory.window));
  write_text(out / "bound.csv", bound_csv(cfg));
  std::printf("trace length %zu, window %zu\n", rep.length, cfg.theory.window);
  std::printf("mean V first window %.6g, last window %.6g\n", rep.first_window_mean, rep.last_window_mean);
  std::printf("non-increasing steps %.3f, contraction ratio %.6g\n", rep.nonincrease_fraction,
              rep.contraction_ratio);
  std::printf("wrote %s\n", (out / "bound.csv").string().c_str());
  return 0;
}

int cmd_report(const std::string& results, const std::string& out_flag) {
  if (!fs::exists(results)) fail(1, "io", "results file not found: " + results);
  auto rows = parse_results_csv(read_text(results));
  Summary s = aggregate(rows);
  fs::path out = out_flag.empty() ? fs::path(results).parent_path() / "summary.csv" : fs::path(out_flag);
  write_text(out, summary_csv(s));
  print_summary(s);
  std::printf("wrote %s\n", out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradual domain osmosis experiments"};
  app.require_subcommand(1);

  std::string config, out, method, results, dir, base_url = kMnistBaseUrl;
  std::size_t threads = 0;
  bool offline = false;

  auto* run = app.add_subcommand("run", "run the full grid");
  run->add_option("config", config, "experiment config (JSON)")->required();
  run->add_option("--out", out, "output directory (default: config output_dir)");
  run->add_option("--threads", threads, "parallel jobs (default: config threads)");

  auto* ablate = app.add_subcommand("ablate", "run the grid and emit the n_given x inter_steps matrix");
  ablate->add_option("config", config, "experiment config (JSON)")->required();
  ablate->add_option("--out", out, "output directory");
  ablate->add_option("--threads", threads, "parallel jobs");
  ablate->add_option("--method", method, "method shown in the matrix (default gdo)");

  auto* theory = app.add_subcommand("theory", "Lyapunov drift report and error bound curves");
  theory->add_option("config", config, "experiment config (JSON)")->required();
  theory->add_option("--out", out, "output directory");

  auto* data = app.add_subcommand("data", "dataset utilities");
  data->require_subcommand(1);
  auto* fetch = data->add_subcommand("fetch-mnist", "download or verify the MNIST IDX archives");
  fetch->add_option("--dir", dir, "target directory")->required();
  fetch->add_option("--base-url", base_url, "mirror to download from");
  fetch->add_flag("--offline", offline, "only verify files already in --dir");

  auto* report = app.add_subcommand("report", "aggregate a results CSV");
  report->add_option("results", results, "results.csv")->required();
  report->add_option("--out", out, "summary CSV path (default: next to results)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*run) return cmd_run(config, out, threads);
    if (*ablate) return cmd_ablate(config, out, threads, method);
    if (*theory) return cmd_theory(config, out);
    if (*fetch) {
      FetchReport r = fetch_mnist(dir, base_url, offline);
      for (const auto& line : r.log) std::printf("%s\n", line.c_str());
      return 0;
    }
    if (*report) return cmd_report(results, out);
  } catch (const Exit& e) {
    std::cerr << "error: " << e.category << ": " << e.message << "\n";
    return e.code;
  } catch (const ConfigError& e) {
    std::cerr << "error: config-invalid: " << e.what() << "\n";
    return 2;
  } catch (const gdo::Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
