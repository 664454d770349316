#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cdf/experiment.hpp"
#include "cdf/metrics.hpp"

namespace cdf {

// Reads a metrics.csv written by write_run; "NA" becomes NaN, "inf" infinity.
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);
std::vector<DrawRow> read_draws_csv(const std::filesystem::path& path);

// One table column: `metric` of `parameter` at shard `t` (0 = last recorded shard of
// each replication), or the run time when metric == "time".
struct TableColumn {
  std::string name;
  std::string metric;
  std::string parameter;
  std::size_t t = 0;
};

// Known ids: tab1 (linreg), tab2 (anova), tab3 (dlm), tab5 (probit), tab6 (compressed
// MSPE and memory), tab7 (relative gamma MSE), tab8 (draws until MSPE threshold),
// tab9 (predictive coverage). Throws ConfigError for an unknown id.
std::vector<TableColumn> table_layout(const std::string& table_id);

// Aggregates every replication in the run directories into one row per algorithm:
// algorithm, then "<column>,<column>_se" pairs. Means carry bootstrap standard errors
// over replications; a single replication gives an NA standard error and a missing
// cell gives NA for both.
std::string make_table(const std::string& table_id, const std::vector<std::filesystem::path>& run_dirs,
                       std::uint64_t seed = 1);

// Accuracy against t, one line per parameter (mean over replications).
// Throws ConfigError when no accuracy rows are present.
std::string accuracy_svg(const std::vector<MetricRow>& metrics, const std::vector<std::string>& parameters = {});
// Kernel density curves of one parameter's draws, one curve per (algorithm, t).
std::string density_svg(const std::vector<DrawRow>& draws, const std::string& parameter,
                        const std::vector<std::size_t>& times = {});

}  // namespace cdf
