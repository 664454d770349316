#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cdf/error.hpp"
#include "cdf/experiment.hpp"
#include "cdf/kernels.hpp"
#include "cdf/report.hpp"
#include "cdf/stream_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

cdf::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed,
                           const std::optional<int>& reps) {
  auto config = cdf::ExperimentConfig::from_ini(path);
  if (seed) config.seed = *seed;
  if (reps) {
    if (*reps < 1) throw cdf::ConfigError("--reps must be >= 1");
    config.replications = *reps;
  }
  config.validate();
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cdf::Error("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming Bayesian inference by conditional density filtering"};
  app.set_version_flag("--version", cdf::version_string());
  app.require_subcommand(1);

  std::string config_path, out_path, table_id = "tab1", kind = "accuracy", input;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  int threads = 1, rep = 0;
  std::vector<std::string> run_dirs, parameters;
  std::vector<std::size_t> times;

  auto* run = app.add_subcommand("run", "Run an experiment and write estimates, metrics, summaries and a manifest");
  run->add_option("--config", config_path, "Experiment config (INI)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override [run] seed");
  run->add_option("--out", out_path, "Output directory")->required();
  run->add_option("--reps", reps, "Override [run] replications");
  run->add_option("--threads", threads, "Worker threads for replications and kernels")->check(CLI::PositiveNumber);

  auto* table = app.add_subcommand("table", "Aggregate run directories into a table with bootstrap standard errors");
  table->add_option("--table", table_id, "Table id (tab1, tab2, tab3, tab5, tab6, tab7, tab8, tab9)");
  table->add_option("--out", out_path, "Output CSV (stdout when omitted)");
  table->add_option("--seed", seed, "Bootstrap seed");
  table->add_option("runs", run_dirs, "Run directories")->required();

  auto* plot = app.add_subcommand("plot", "Render an SVG plot from metrics.csv (accuracy) or draws.csv (density)");
  plot->add_option("--kind", kind, "accuracy or density")->check(CLI::IsMember({"accuracy", "density"}));
  plot->add_option("--input", input, "metrics.csv or draws.csv")->required();
  plot->add_option("--out", out_path, "Output SVG")->required();
  plot->add_option("--parameter", parameters, "Parameters to include (density: exactly one)");
  plot->add_option("--times", times, "Shards to overlay (density)");

  auto* simulate = app.add_subcommand("simulate", "Write a simulated design's stream as CSV");
  simulate->add_option("--config", config_path, "Experiment config (INI)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Override [run] seed");
  simulate->add_option("--out", out_path, "Output CSV")->required();
  simulate->add_option("--rep", rep, "Replication index")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const auto config = load(config_path, seed, reps);
      cdf::kernels::set_threads(threads);
      const auto out = cdf::run_experiment(config, threads);
      cdf::write_run(out, config, out_path);
      for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "wrote " << out_path << " (" << config.replications << " replication(s), " << out.shards
                << " shards)\n";
    } else if (*table) {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      const std::string csv = cdf::make_table(table_id, dirs, seed.value_or(1));
      if (out_path.empty()) std::cout << csv;
      else write_text(out_path, csv);
    } else if (*plot) {
      if (!fs::exists(input)) throw cdf::ConfigError("input not found: " + input);
      std::string svg;
      if (kind == "accuracy") {
        svg = cdf::accuracy_svg(cdf::read_metrics_csv(input), parameters);
      } else {
        if (parameters.size() != 1) throw cdf::ConfigError("density plots need exactly one --parameter");
        svg = cdf::density_svg(cdf::read_draws_csv(input), parameters.front(), times);
      }
      write_text(out_path, svg);
    } else if (*simulate) {
      const auto config = load(config_path, seed, std::nullopt);
      const auto shards = cdf::simulate_design(config, rep);
      if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw cdf::Error("cannot write " + out_path);
      cdf::write_shards_csv(out, shards);
    }
  } catch (const cdf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cdf::StreamError& e) {
    std::cerr << "numeric error at shard " << e.shard_index() << ": " << e.what() << '\n';
    return kExitNumeric;
  } catch (const cdf::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
