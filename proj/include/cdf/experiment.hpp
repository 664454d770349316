#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cdf/metrics.hpp"
#include "cdf/stream_io.hpp"

namespace cdf {

// RNG slots of RngStream::derive(seed, rep, slot).
enum RngSlot : std::uint32_t {
  kSlotData = 0,
  kSlotTest = 1,
  kSlotCdf = 2,
  kSlotExact = 3,
  kSlotProjection = 4,
  kSlotMetrics = 5,
  kSlotMetricsExact = 6,
};

// Validated experiment description; see docs/config.md for the file grammar.
struct ExperimentConfig {
  std::string model;               // linreg, anova, dlm, probit, compressed, poisson
  std::string algorithm = "cdf";   // cdf, smcmc, both
  std::size_t draws = 500;
  std::size_t burnin = 0;
  int replications = 1;
  std::uint64_t seed = 1;
  std::size_t record_every = 1;    // metrics at every k-th shard, the checkpoints and the last shard
  std::vector<std::size_t> checkpoints;
  bool store_draws = false;
  std::size_t accuracy_parameters = 10;
  double ess_threshold = 5.0;

  // Raw key/value pairs of the [design], [model] and [data] sections, checked
  // against the keys each model accepts by validate().
  std::map<std::string, std::string> design;
  std::map<std::string, std::string> knobs;
  std::map<std::string, std::string> data;

  static ExperimentConfig from_ini(const std::filesystem::path& path);
  static ExperimentConfig from_ini_string(const std::string& text);
  // Throws ConfigError on an unknown model, algorithm or key, or an unparsable value.
  void validate() const;
  // Canonical key = value listing; equal configs give equal text.
  std::string canonical() const;
  std::uint64_t hash() const;

  bool runs_cdf() const { return algorithm == "cdf" || algorithm == "both"; }
  bool runs_exact() const { return algorithm == "smcmc" || algorithm == "both"; }
  // Horizon of the simulated design (0 for CSV input, whose length is the file's).
  std::size_t horizon() const;
};

struct EstimateRow {
  int rep = 0;
  std::size_t t = 0;
  std::string algorithm;
  std::string parameter;
  double estimate = 0.0;
};

struct SummaryRow {
  int rep = 0;
  std::size_t t = 0;
  std::string algorithm;
  std::string parameter;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

struct DrawRow {
  int rep = 0;
  std::size_t t = 0;
  std::string algorithm;
  std::string parameter;
  std::size_t draw = 0;
  double value = 0.0;
};

struct RunOutput {
  std::vector<EstimateRow> estimates;
  std::vector<MetricRow> metrics;
  std::vector<SummaryRow> summaries;
  std::vector<DrawRow> draws;  // only with store_draws
  // Wall-clock seconds per algorithm, one entry per replication.
  std::map<std::string, std::vector<double>> seconds;
  // Peak bytes of propagated statistics plus retained data, per algorithm.
  std::map<std::string, std::size_t> peak_bytes;
  std::size_t shards = 0;
  std::vector<std::string> warnings;
};

// Runs every replication (spread over `threads` workers when OpenMP is available)
// and concatenates the outputs in replication order, so the result does not
// depend on the thread count. Numeric failures surface as StreamError.
RunOutput run_experiment(const ExperimentConfig& config, int threads = 1);
RunOutput run_replication(const ExperimentConfig& config, int rep);

// Simulated stream of replication `rep` (data slot), for `simulate`.
std::vector<Shard> simulate_design(const ExperimentConfig& config, int rep = 0);

// estimates.csv, metrics.csv, draws_summary.csv, manifest.json (and draws.csv when stored).
void write_run(const RunOutput& out, const ExperimentConfig& config, const std::filesystem::path& dir);

// "%.12g" rendering used in every CSV; NaN is "NA", infinities "inf".
std::string format_number(double v);

std::string version_string();

}  // namespace cdf
