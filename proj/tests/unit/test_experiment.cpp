#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "cdf/error.hpp"
#include "cdf/experiment.hpp"
#include "cdf/report.hpp"
#include "doctest.h"

using namespace cdf;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "cdf_experiment_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small_linreg(int reps = 1) {
  return ExperimentConfig::from_ini_string(
      "[run]\nmodel = linreg\nalgorithm = both\ndraws = 50\nseed = 4\nreplications = " + std::to_string(reps) +
      "\n[design]\nhorizon = 5\n");
}

}  // namespace

TEST_CASE("config parsing rejects unknown sections, keys and bad values") {
  CHECK_THROWS_AS(ExperimentConfig::from_ini_string("[run]\nmodel = linreg\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini_string("[run]\nmodel = linreg\n[extra]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini_string("[run]\nmodel = nope\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini_string("[run]\nmodel = linreg\nalgorithm = gibbs\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini_string("[run]\nmodel = linreg\ndraws = ten\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini_string("[run]\nmodel = linreg\n[design]\nrho = 0.5\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini_string("[run]\nmodel = anova\n[model]\nwindow = 3\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini_string("[run]\nmodel = compressed\n[design]\ncase = 9\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini("/nonexistent/run.ini"), ConfigError);
}

TEST_CASE("config canonical form and hash ignore key order") {
  const auto a = ExperimentConfig::from_ini_string("[run]\nmodel = linreg\nseed = 3\ndraws = 20\n");
  const auto b = ExperimentConfig::from_ini_string("[run]\ndraws = 20\nseed = 3\nmodel = linreg\n");
  const auto c = ExperimentConfig::from_ini_string("[run]\ndraws = 20\nseed = 4\nmodel = linreg\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.horizon() == 500);
}

TEST_CASE("format_number renders NA, inf and 12 significant digits") {
  CHECK(format_number(std::nan("")) == "NA");
  CHECK(format_number(INFINITY) == "inf");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
}

TEST_CASE("a minimal linreg run writes every artifact") {
  const auto cfg = small_linreg();
  const auto out = run_experiment(cfg);
  CHECK(out.shards == 5);
  const auto dir = fresh_dir("minimal");
  write_run(out, cfg, dir);
  for (const char* f : {"estimates.csv", "metrics.csv", "draws_summary.csv", "manifest.json"})
    CHECK(std::filesystem::exists(dir / f));
  CHECK_FALSE(std::filesystem::exists(dir / "draws.csv"));
  CHECK(slurp(dir / "estimates.csv").rfind("rep,t,algorithm,parameter,estimate\n", 0) == 0);
  CHECK(slurp(dir / "draws_summary.csv").rfind("rep,t,algorithm,parameter,q2.5,q50,q97.5\n", 0) == 0);
  std::set<std::string> algorithms;
  for (const auto& e : out.estimates) algorithms.insert(e.algorithm);
  CHECK(algorithms == std::set<std::string>{"cdf", "smcmc"});
  for (const auto& s : out.summaries) {
    CHECK(s.q025 <= s.q50);
    CHECK(s.q50 <= s.q975);
  }
}

TEST_CASE("runs are byte-deterministic and independent of the thread count") {
  const auto cfg = small_linreg(3);
  const auto d1 = fresh_dir("det1");
  const auto d2 = fresh_dir("det2");
  write_run(run_experiment(cfg, 1), cfg, d1);
  write_run(run_experiment(cfg, 3), cfg, d2);
  for (const char* f : {"estimates.csv", "metrics.csv", "draws_summary.csv"}) CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("replications differ and the seed matters") {
  auto cfg = small_linreg(2);
  const auto out = run_experiment(cfg);
  double r0 = 0.0, r1 = 0.0;
  for (const auto& e : out.estimates)
    if (e.parameter == "beta[1]" && e.t == 5 && e.algorithm == "cdf") (e.rep == 0 ? r0 : r1) = e.estimate;
  CHECK(r0 != r1);
}

TEST_CASE("tables: a single replication has NA standard errors, several populate them") {
  auto one = small_linreg(1);
  one.knobs.clear();
  const auto d1 = fresh_dir("tab_one");
  write_run(run_experiment(one), one, d1);
  const std::string t1 = make_table("tab1", {d1});
  CHECK(t1.find("cdf,") != std::string::npos);
  CHECK(t1.find(",NA") != std::string::npos);

  const auto many = small_linreg(10);
  const auto d10 = fresh_dir("tab_many");
  write_run(run_experiment(many), many, d10);
  const std::string t10 = make_table("tab1", {d10});
  std::istringstream rows(t10);
  std::string header, row;
  std::getline(rows, header);
  std::getline(rows, row);
  // avg_coverage of beta and its standard error are the first two cells.
  std::istringstream cells(row);
  std::string algorithm, cov, cov_se;
  std::getline(cells, algorithm, ',');
  std::getline(cells, cov, ',');
  std::getline(cells, cov_se, ',');
  CHECK(cov != "NA");
  CHECK(cov_se != "NA");
  CHECK_THROWS_AS(make_table("tab4", {d10}), ConfigError);
}

TEST_CASE("svg plots are well formed even with a single point") {
  std::vector<MetricRow> rows;
  MetricRow r;
  r.rep = 0;
  r.t = 1;
  r.algorithm = "both";
  r.metric = "accuracy";
  r.parameter = "beta[1]";
  r.value = 0.9;
  rows.push_back(r);
  const std::string svg = accuracy_svg(rows);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  CHECK_THROWS_AS(accuracy_svg({}), ConfigError);

  std::vector<DrawRow> draws;
  for (std::size_t s = 0; s < 20; ++s) draws.push_back({0, 3, "cdf", "beta[1]", s, 0.1 * static_cast<double>(s)});
  const std::string dens = density_svg(draws, "beta[1]");
  CHECK(dens.find("</svg>") != std::string::npos);
  CHECK(dens.find("nan") == std::string::npos);
}

TEST_CASE("metrics csv round trips through the reader") {
  const auto cfg = small_linreg();
  const auto out = run_experiment(cfg);
  const auto dir = fresh_dir("roundtrip");
  write_run(out, cfg, dir);
  const auto back = read_metrics_csv(dir / "metrics.csv");
  REQUIRE(back.size() == out.metrics.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].metric == out.metrics[i].metric);
    if (std::isfinite(out.metrics[i].value)) CHECK(back[i].value == doctest::Approx(out.metrics[i].value).epsilon(1e-11));
  }
}

TEST_CASE("stored draws match the requested count") {
  auto cfg = ExperimentConfig::from_ini_string(
      "[run]\nmodel = anova\ndraws = 30\nstore_draws = true\n[design]\nhorizon = 3\n");
  const auto out = run_experiment(cfg);
  std::size_t n = 0;
  for (const auto& d : out.draws)
    if (d.parameter == "mu" && d.t == 2) ++n;
  CHECK(n == 30);
  const auto dir = fresh_dir("draws");
  write_run(out, cfg, dir);
  CHECK(read_draws_csv(dir / "draws.csv").size() == out.draws.size());
}

TEST_CASE("a bad row in a later shard surfaces as StreamError with its shard index") {
  const auto dir = fresh_dir("bad_level");
  std::ofstream(dir / "schema.ini") << "[schema]\nresponse = y\ncontinuous = x\ncategorical = g\nshard_size = 4\n"
                                       "[levels]\ng = a,b\n";
  std::ofstream csv(dir / "data.csv");
  csv << "x,g,y\n";
  for (int i = 0; i < 8; ++i) csv << 0.5 * i << "," << (i % 2 ? "a" : "b") << "," << 1.0 + i << "\n";
  csv << "1.0,c,2.0\n";
  csv.close();
  const auto cfg = ExperimentConfig::from_ini_string("[run]\nmodel = linreg\ndraws = 20\n[data]\npath = " +
                                                     (dir / "data.csv").string() + "\nschema = " +
                                                     (dir / "schema.ini").string() + "\n");
  try {
    run_experiment(cfg);
    FAIL("expected a StreamError");
  } catch (const StreamError& e) {
    CHECK(e.shard_index() == 3);
  }
}
