#include "cdf/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "cdf/engine.hpp"
#include "cdf/error.hpp"
#include "cdf/models/anova.hpp"
#include "cdf/models/compressed.hpp"
#include "cdf/models/dlm.hpp"
#include "cdf/models/linreg.hpp"
#include "cdf/models/poisson_vb.hpp"
#include "cdf/models/probit.hpp"

#ifndef CDF_VERSION
#define CDF_VERSION "0.0.0"
#endif

namespace cdf {

std::string version_string() { return CDF_VERSION; }

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

using KeyMap = std::map<std::string, std::string>;

const std::set<std::string> kModels = {"linreg", "anova", "dlm", "probit", "compressed", "poisson"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& key, const std::string& text) {
  double v = 0.0;
  const std::string s = trim(text);
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("key '" + key + "': '" + text + "' is not a finite number");
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& text, std::size_t min) {
  const double v = parse_number(key, text);
  if (v != std::floor(v) || v < static_cast<double>(min) || v > 1e15)
    throw ConfigError("key '" + key + "': expected an integer >= " + std::to_string(min) + ", got '" + text + "'");
  return static_cast<std::size_t>(v);
}

bool parse_flag(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'");
}

// Typed reads from one section; construction rejects keys outside `allowed`.
class Keys {
 public:
  Keys(const KeyMap& values, const std::string& section, const std::string& model,
       std::initializer_list<const char*> allowed)
      : values_(values) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : values)
      if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in [" + section + "] for model " + model);
  }
  bool has(const std::string& k) const { return values_.count(k) > 0; }
  double num(const std::string& k, double def) const { return has(k) ? parse_number(k, values_.at(k)) : def; }
  double positive(const std::string& k, double def) const {
    const double v = num(k, def);
    if (!(v > 0.0)) throw ConfigError("key '" + k + "' must be positive");
    return v;
  }
  double nonnegative(const std::string& k, double def) const {
    const double v = num(k, def);
    if (v < 0.0) throw ConfigError("key '" + k + "' must be non-negative");
    return v;
  }
  std::size_t count(const std::string& k, std::size_t def, std::size_t min = 1) const {
    return has(k) ? parse_count(k, values_.at(k), min) : def;
  }
  bool flag(const std::string& k, bool def) const { return has(k) ? parse_flag(k, values_.at(k)) : def; }
  std::string text(const std::string& k, const std::string& def) const { return has(k) ? trim(values_.at(k)) : def; }
  std::optional<Vector> vec(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    const auto items = split_list(values_.at(k));
    if (items.empty()) throw ConfigError("key '" + k + "' needs at least one value");
    Vector v(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_number(k, items[i]);
    return v;
  }

 private:
  const KeyMap& values_;
};

LinRegDesign linreg_design(const ExperimentConfig& c) {
  Keys k(c.design, "design", c.model, {"horizon", "n", "sigma", "beta"});
  LinRegDesign d;
  d.horizon = k.count("horizon", d.horizon);
  d.n = static_cast<Eigen::Index>(k.count("n", static_cast<std::size_t>(d.n)));
  d.sigma = k.nonnegative("sigma", d.sigma);
  if (auto b = k.vec("beta")) d.beta = *b;
  return d;
}

AnovaDesign anova_design(const ExperimentConfig& c) {
  Keys k(c.design, "design", c.model, {"horizon", "k", "n", "mu", "tau2", "sigma"});
  AnovaDesign d;
  d.horizon = k.count("horizon", d.horizon);
  d.k = static_cast<int>(k.count("k", static_cast<std::size_t>(d.k)));
  d.n = static_cast<int>(k.count("n", static_cast<std::size_t>(d.n)));
  d.mu = k.num("mu", d.mu);
  d.tau2 = k.nonnegative("tau2", d.tau2);
  d.sigma = k.nonnegative("sigma", d.sigma);
  return d;
}

DlmDesign dlm_design(const ExperimentConfig& c) {
  Keys k(c.design, "design", c.model, {"horizon", "phi", "tau", "sigma"});
  DlmDesign d;
  d.horizon = k.count("horizon", d.horizon);
  d.phi = k.num("phi", d.phi);
  if (std::abs(d.phi) >= 1.0) throw ConfigError("key 'phi' must lie in (-1, 1)");
  d.tau = k.nonnegative("tau", d.tau);
  d.sigma = k.nonnegative("sigma", d.sigma);
  return d;
}

ProbitDesign probit_design(const ExperimentConfig& c) {
  Keys k(c.design, "design", c.model, {"horizon", "case", "p", "n", "x_sd"});
  const std::size_t id = k.count("case", 1, 0);
  ProbitDesign d;
  if (id == 2) d = ProbitDesign::case2();
  else if (id == 1 || id == 0) d.scenario = static_cast<int>(id);
  else throw ConfigError("probit case must be 0, 1 or 2");
  d.horizon = k.count("horizon", d.horizon);
  d.p = static_cast<Eigen::Index>(k.count("p", static_cast<std::size_t>(d.p)));
  d.n = static_cast<Eigen::Index>(k.count("n", static_cast<std::size_t>(d.n)));
  d.x_sd = k.positive("x_sd", d.x_sd);
  return d;
}

CompressedDesign compressed_design(const ExperimentConfig& c) {
  Keys k(c.design, "design", c.model, {"horizon", "case", "rho", "p", "nonzero", "signal", "n", "sigma2"});
  const std::size_t id = k.count("case", 1);
  if (id > 6) throw ConfigError("compressed case must be in 1..6");
  CompressedDesign d = CompressedDesign::standard_case(static_cast<int>(id));
  d.horizon = k.count("horizon", d.horizon);
  d.rho = k.nonnegative("rho", d.rho);
  if (d.rho >= 1.0) throw ConfigError("key 'rho' must lie in [0, 1)");
  d.p = static_cast<Eigen::Index>(k.count("p", static_cast<std::size_t>(d.p)));
  d.nonzero = static_cast<Eigen::Index>(k.count("nonzero", static_cast<std::size_t>(std::min(d.nonzero, d.p)), 0));
  if (d.nonzero > d.p) throw ConfigError("key 'nonzero' exceeds p");
  const std::string signal = k.text("signal", d.high_signal ? "high" : "low");
  if (signal != "high" && signal != "low") throw ConfigError("key 'signal' must be high or low");
  d.high_signal = signal == "high";
  d.n = static_cast<Eigen::Index>(k.count("n", static_cast<std::size_t>(d.n)));
  d.sigma2 = k.nonnegative("sigma2", d.sigma2);
  return d;
}

PoissonDesign poisson_design(const ExperimentConfig& c) {
  Keys k(c.design, "design", c.model, {"horizon", "n", "levels", "sigma_u", "beta"});
  PoissonDesign d;
  d.horizon = k.count("horizon", d.horizon);
  d.n = static_cast<Eigen::Index>(k.count("n", static_cast<std::size_t>(d.n)));
  d.levels = static_cast<int>(k.count("levels", static_cast<std::size_t>(d.levels)));
  d.sigma_u = k.nonnegative("sigma_u", d.sigma_u);
  if (auto b = k.vec("beta")) d.beta = *b;
  return d;
}

std::size_t probit_budget(const ExperimentConfig& c, Eigen::Index p) {
  Keys k(c.knobs, "model", c.model, {"budget"});
  std::size_t def = probit_default_budget(p);
  if (c.data.empty()) {
    const ProbitDesign d = probit_design(c);
    if (d.scenario == 1 && d.p == 100) def = 500;
    if (d.scenario == 2 && d.p == 500) def = 3500;
  }
  return k.count("budget", def);
}

struct Setup {
  Simulation sim;
  std::shared_ptr<ShardSource> source;
  std::unique_ptr<ModelHooks> cdf;
  std::unique_ptr<ModelHooks> exact;
  bool from_csv = false;
  // Vector parameter compared with truth["<primary>"] (empty when none).
  std::string primary;
  // (parameter, coordinate) pairs compared by accuracy_tv in paired runs.
  std::vector<std::pair<std::string, Eigen::Index>> accuracy;
  std::set<std::string> hidden;  // estimates/draws not written (large or unidentified)
  std::vector<std::string> warnings;
};

void add_accuracy(Setup& s, const std::string& id, Eigen::Index dim, std::size_t cap) {
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(dim, static_cast<Eigen::Index>(cap)); ++j)
    s.accuracy.emplace_back(id, dim == 1 ? -1 : j);
}

Setup build(const ExperimentConfig& c, int rep) {
  Setup s;
  const auto r = static_cast<std::uint32_t>(rep);
  RngStream data = RngStream::derive(c.seed, r, kSlotData);
  RngStream test = RngStream::derive(c.seed, r, kSlotTest);
  const std::size_t cap = c.accuracy_parameters;
  Eigen::Index csv_p = 0;
  if (!c.data.empty()) {
    Keys k(c.data, "data", c.model, {"path", "schema"});
    CsvSchema schema = CsvSchema::from_ini(k.text("schema", ""));
    if (c.model == "linreg") schema.binary_response = false;
    auto src = std::make_shared<CsvShardSource>(k.text("path", ""), schema);
    csv_p = static_cast<Eigen::Index>(src->column_names().size());
    s.source = src;
    s.from_csv = true;
  }

  if (c.model == "linreg") {
    Keys k(c.knobs, "model", c.model, {"a", "b", "init_sigma2"});
    LinRegPrior prior{k.positive("a", 1.0), k.positive("b", 1.0)};
    const std::string start = k.text("init_sigma2", "one");
    if (start != "one" && start != "first_shard") throw ConfigError("key 'init_sigma2' must be one or first_shard");
    Eigen::Index p = csv_p;
    if (!s.from_csv) {
      const LinRegDesign d = linreg_design(c);
      s.sim = gen_linreg(d, data);
      p = d.beta.size();
    }
    auto cdf = std::make_unique<LinRegCdf>(p, prior);
    cdf->start_from_first_shard(start == "first_shard");
    s.cdf = std::move(cdf);
    s.exact = std::make_unique<LinRegExact>(p, prior);
    s.primary = "beta";
    add_accuracy(s, "beta", p, cap);
    add_accuracy(s, "sigma2", 1, cap);
  } else if (c.model == "anova") {
    Keys k(c.knobs, "model", c.model, {"a", "b", "alpha", "beta", "cumulative_c1"});
    AnovaPrior prior{k.positive("a", 1.0), k.positive("b", 1.0), k.positive("alpha", 1.0), k.positive("beta", 1.0)};
    const AnovaDesign d = anova_design(c);
    s.sim = gen_anova(d, data);
    s.cdf = std::make_unique<AnovaCdf>(d.k, prior, k.flag("cumulative_c1", false));
    s.exact = std::make_unique<AnovaExact>(d.k, prior);
    s.primary = "zeta";
    add_accuracy(s, "zeta", d.k, cap);
    for (const char* id : {"mu", "tau2", "sigma2"}) add_accuracy(s, id, 1, cap);
  } else if (c.model == "dlm") {
    Keys k(c.knobs, "model", c.model, {"window", "mh_steps", "mh_step_size", "a0", "b0", "c0", "d0", "h0"});
    DlmConfig cfg;
    cfg.window = k.count("window", cfg.window);
    cfg.mh_steps = k.count("mh_steps", cfg.mh_steps);
    cfg.mh_step_size = k.positive("mh_step_size", cfg.mh_step_size);
    DlmPrior prior{k.positive("a0", 1.0), k.positive("b0", 1.0), k.positive("c0", 1.0), k.positive("d0", 1.0),
                   k.positive("h0", 10.0)};
    const DlmDesign d = dlm_design(c);
    s.sim = gen_dlm(d, data);
    s.cdf = std::make_unique<Dlm>(cfg, prior);
    DlmConfig full = cfg;
    full.window = d.horizon + 1;  // never retires: exact Gibbs over the whole path
    s.exact = std::make_unique<Dlm>(full, prior);
    for (const char* id : {"phi", "tau2", "sigma2"}) add_accuracy(s, id, 1, cap);
  } else if (c.model == "probit") {
    Eigen::Index p = csv_p;
    if (!s.from_csv) {
      const ProbitDesign d = probit_design(c);
      s.sim = gen_probit(d, data, test);
      p = d.p;
      s.primary = "beta";
    }
    s.cdf = std::make_unique<ProbitCdf>(p, probit_budget(c, p));
    s.exact = std::make_unique<ProbitExact>(p);
    add_accuracy(s, "beta", p, cap);
  } else if (c.model == "compressed") {
    const CompressedDesign d = compressed_design(c);
    Keys k(c.knobs, "model", c.model, {"m", "c", "d"});
    const auto m = static_cast<Eigen::Index>(k.count("m", static_cast<std::size_t>(compressed_default_m(d.p))));
    if (m > d.p) throw ConfigError("key 'm' exceeds p");
    CompressedPrior prior{k.positive("c", 1.0), k.positive("d", 1.0)};
    RngStream proj = RngStream::derive(c.seed, r, kSlotProjection);
    const Matrix phi0 = make_projection_prior(m, d.p, proj);
    s.sim = gen_compressed(d, data, test);
    s.cdf = std::make_unique<CompressedCdf>(phi0, prior);
    s.exact = std::make_unique<CompressedExact>(phi0, prior);
    s.hidden = {"Phi", "beta", "kappa"};
    add_accuracy(s, "gamma", d.p, cap);
    add_accuracy(s, "sigma2", 1, cap);
  } else if (c.model == "poisson") {
    const PoissonDesign d = poisson_design(c);
    Keys k(c.knobs, "model", c.model,
           {"sigma_beta2", "a", "max_iterations", "tolerance", "anchor_previous_shard"});
    PoissonVbConfig cfg;
    cfg.fixed_effects = d.beta.size();
    cfg.random_sizes = {d.levels};
    cfg.sigma_beta2 = k.positive("sigma_beta2", cfg.sigma_beta2);
    cfg.a = {k.positive("a", 1.0)};
    cfg.max_iterations = k.count("max_iterations", cfg.max_iterations);
    cfg.tolerance = k.positive("tolerance", cfg.tolerance);
    cfg.anchor_previous_shard = k.flag("anchor_previous_shard", false);
    s.sim = gen_poisson(d, data);
    s.cdf = std::make_unique<PoissonVb>(cfg);
    s.hidden = {"Sigma"};
  }
  if (!s.from_csv) s.source = s.sim.stream;
  return s;
}

// Final per-index latent estimates and intervals; an index keeps the values from the
// last step in which it was still being sampled.
struct LatentTrack {
  std::vector<double> estimate, lo, hi;
  void update(const Matrix& theta, std::size_t first, std::size_t t, bool all, const Dlm& model,
              const SamplerState& state) {
    if (estimate.size() < t + 1) {
      estimate.resize(t + 1, 0.0);
      lo.resize(t + 1, 0.0);
      hi.resize(t + 1, 0.0);
    }
    for (Eigen::Index j = 0; j < theta.cols(); ++j) {
      const std::size_t idx = first + static_cast<std::size_t>(j);
      if (idx == 0) continue;
      estimate[idx] = theta.col(j).mean();
      if (all || model.retires_after(state, idx) || idx == t) {
        std::vector<double> col(theta.col(j).data(), theta.col(j).data() + theta.rows());
        const CredibleInterval ci = credible_interval(col);
        lo[idx] = ci.lo;
        hi[idx] = ci.hi;
      }
    }
  }
};

struct EssTrack {
  std::vector<MspeCheckpoint> checkpoints;
  bool reached = false;
  void update(const Matrix& gamma, const Matrix& x_test, const Vector& y_test, std::size_t t, double threshold) {
    if (reached) return;
    const auto s_count = static_cast<std::size_t>(gamma.rows());
    Vector sum = Vector::Zero(gamma.cols());
    for (std::size_t s = 0; s < s_count; ++s) {
      sum += gamma.row(static_cast<Eigen::Index>(s)).transpose();
      if ((s + 1) % 10 != 0 && s + 1 != s_count) continue;
      const Vector pred = x_test * (sum / static_cast<double>(s + 1));
      checkpoints.push_back({(t - 1) * s_count + s + 1, mspe(pred, y_test)});
      if (checkpoints.back().mspe <= threshold) {
        reached = true;
        return;
      }
    }
  }
};

std::string coordinate_name(const std::string& id, Eigen::Index j) {
  return j < 0 ? id : id + "[" + std::to_string(j + 1) + "]";
}

std::vector<double> column(const Matrix& m, Eigen::Index j) {
  return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}

class Recorder {
 public:
  Recorder(const ExperimentConfig& c, int rep, RunOutput& out) : c_(c), rep_(rep), out_(out) {}

  void metric(std::size_t t, const std::string& alg, const std::string& metric, const std::string& param,
              double value, const std::string& flag = "") {
    MetricRow row;
    row.rep = rep_;
    row.t = t;
    row.algorithm = alg;
    row.metric = metric;
    row.parameter = param;
    row.value = value;
    row.flag = flag;
    out_.metrics.push_back(std::move(row));
  }

  void coverage(std::size_t t, const std::string& alg, const std::string& param, const CoverageResult& r) {
    const std::string flag = r.few_draws ? "few_draws" : "";
    metric(t, alg, "coverage", param, r.coverage, flag);
    metric(t, alg, "length", param, r.mean_length, flag);
  }

  // Estimates, quantile summaries and (optionally) raw draws of every visible parameter.
  void parameters(std::size_t t, const std::string& alg, const DrawBatch& batch, const SamplerState& state,
                  const Setup& setup, bool newest_latent_only) {
    for (const auto& [id, est] : state.estimates) {
      if (setup.hidden.count(id)) continue;
      if (newest_latent_only && id == "theta") {
        out_.estimates.push_back({rep_, t, alg, "theta", est(est.size() - 1)});
        continue;
      }
      for (Eigen::Index j = 0; j < est.size(); ++j)
        out_.estimates.push_back({rep_, t, alg, coordinate_name(id, est.size() == 1 ? -1 : j), est(j)});
    }
    for (const auto& [id, draws] : batch.draws) {
      if (setup.hidden.count(id)) continue;
      Eigen::Index from = 0;
      if (newest_latent_only && id == "theta") from = draws.cols() - 1;
      for (Eigen::Index j = from; j < draws.cols(); ++j) {
        const std::string name =
            (newest_latent_only && id == "theta") ? "theta" : coordinate_name(id, draws.cols() == 1 ? -1 : j);
        std::vector<double> col = column(draws, j);
        if (c_.store_draws)
          for (std::size_t s = 0; s < col.size(); ++s) out_.draws.push_back({rep_, t, alg, name, s + 1, col[s]});
        out_.summaries.push_back({rep_, t, alg, name, quantile(col, 0.025), quantile(col, 0.5), quantile(col, 0.975)});
      }
    }
  }

 private:
  const ExperimentConfig& c_;
  int rep_;
  RunOutput& out_;
};

struct AlgorithmRun {
  std::string label;
  ModelHooks* model = nullptr;
  SamplerState state;
  DrawBatch batch;
  double seconds = 0.0;
  std::size_t peak = 0;
  RngStream metrics_rng;
  LatentTrack latent;
  EssTrack ess;
  double shard_errors = 0.0, shard_rows = 0.0;
  // Interval coverage and length summed over every shard so far (time-averaged coverage).
  double coverage_sum = 0.0, length_sum = 0.0;
  std::size_t coverage_shards = 0;
  bool few_draws = false;
};

void model_metrics(const ExperimentConfig& c, const Setup& setup, AlgorithmRun& a, Recorder& rec) {
  const std::size_t t = a.state.t;
  const auto& truth = setup.sim.truth;
  rec.metric(t, a.label, "memory_bytes", "retained", static_cast<double>(a.model->retained_bytes(a.state)));
  if (c.model == "linreg" || c.model == "anova" || (c.model == "probit" && !setup.from_csv)) {
    if (setup.from_csv) return;
    const Vector& est = a.state.estimate(setup.primary);
    const Vector& tr = truth.at(setup.primary);
    rec.metric(t, a.label, "mse", setup.primary, mse(est, tr));
    rec.coverage(t, a.label, setup.primary, interval_coverage(a.batch.at(setup.primary), tr));
    if (a.coverage_shards > 0) {
      const double n = static_cast<double>(a.coverage_shards);
      const std::string flag = a.few_draws ? "few_draws" : "";
      rec.metric(t, a.label, "avg_coverage", setup.primary, a.coverage_sum / n, flag);
      rec.metric(t, a.label, "avg_length", setup.primary, a.length_sum / n, flag);
    }
    if (c.model == "probit") {
      const Eigen::Index lead = std::min<Eigen::Index>(10, tr.size());
      rec.metric(t, a.label, "mse", "beta[1:10]", mse(est.head(lead), tr.head(lead)));
      const Vector prob = probit_predict(a.batch.at("beta"), setup.sim.x_test);
      double wrong = 0.0;
      for (Eigen::Index i = 0; i < prob.size(); ++i)
        wrong += ((prob(i) > 0.5 ? 1.0 : -1.0) != setup.sim.y_test(i)) ? 1.0 : 0.0;
      rec.metric(t, a.label, "misclassification", "test", wrong / static_cast<double>(prob.size()));
    }
  } else if (c.model == "probit") {
    if (a.shard_rows > 0.0) rec.metric(t, a.label, "misclassification", "one_step", a.shard_errors / a.shard_rows);
  } else if (c.model == "compressed") {
    const Vector& gamma = a.state.estimate("gamma");
    const Vector& beta = truth.at("beta");
    rec.metric(t, a.label, "mspe", "test", mspe(setup.sim.x_test * gamma, setup.sim.y_test));
    rec.metric(t, a.label, "relative_mse", "gamma", (gamma - beta).squaredNorm() / beta.squaredNorm());
    const Matrix mean_draws = a.batch.at("gamma") * setup.sim.x_test.transpose();
    rec.coverage(t, a.label, "predictive",
                 predictive_coverage(mean_draws, a.batch.at("sigma2").col(0), setup.sim.y_test, a.metrics_rng));
    const std::size_t ess = ess_until(a.ess.checkpoints, c.ess_threshold);
    rec.metric(t, a.label, "ess_until", "mspe<=" + format_number(c.ess_threshold),
               ess == kNeverReached ? INFINITY : static_cast<double>(ess), ess == kNeverReached ? "never" : "");
  } else if (c.model == "dlm") {
    const Vector& path = truth.at("theta");
    double sq = 0.0, covered = 0.0, length = 0.0;
    for (std::size_t i = 1; i <= t; ++i) {
      const double th = path(static_cast<Eigen::Index>(i) - 1);
      sq += (a.latent.estimate[i] - th) * (a.latent.estimate[i] - th);
      covered += (a.latent.lo[i] <= th && th <= a.latent.hi[i]) ? 1.0 : 0.0;
      length += a.latent.hi[i] - a.latent.lo[i];
    }
    const double n = static_cast<double>(t);
    const std::string flag = c.draws < kMinIntervalDraws ? "few_draws" : "";
    rec.metric(t, a.label, "mse", "theta", sq / n);
    rec.metric(t, a.label, "coverage", "theta", covered / n, flag);
    rec.metric(t, a.label, "length", "theta", length / n, flag);
    rec.metric(t, a.label, "abs_error", "phi", std::abs(a.state.scalar_estimate("phi") - truth.at("phi")(0)));
    rec.metric(t, a.label, "acceptance", "phi", Dlm::acceptance_rate(a.state));
  } else if (c.model == "poisson") {
    const Vector& mu = a.state.estimate("mu");
    const Vector& beta = truth.at("beta");
    const Vector& u = truth.at("u");
    rec.metric(t, a.label, "mse", "beta", mse(mu.head(beta.size()), beta));
    rec.metric(t, a.label, "mse", "u", mse(mu.tail(u.size()), u));
    rec.metric(t, a.label, "iterations", "fixed_point", static_cast<double>(PoissonVb::last_iterations(a.state)));
  }
}

void paired_metrics(const ExperimentConfig& c, const Setup& setup, const AlgorithmRun& cdf,
                    const AlgorithmRun& exact, Recorder& rec) {
  const std::size_t t = cdf.state.t;
  for (const auto& [id, j] : setup.accuracy) {
    const Matrix& a = cdf.batch.at(id);
    const Matrix& b = exact.batch.at(id);
    const Eigen::Index col_a = j < 0 ? a.cols() - 1 : j;
    const Eigen::Index col_b = j < 0 ? b.cols() - 1 : j;
    const std::vector<double> da = column(a, col_a), db = column(b, col_b);
    rec.metric(t, "both", "accuracy", coordinate_name(id, j), accuracy_tv(da, db),
               da.size() < 100 ? "few_draws" : "");
  }
  const std::string vec_id = c.model == "compressed" ? "gamma" : c.model == "anova" ? "zeta" : "beta";
  if (c.model != "dlm") {
    const Vector& a = cdf.state.estimate(vec_id);
    const Vector& b = exact.state.estimate(vec_id);
    const double denom = b.cwiseAbs().sum();
    if (denom > 0.0) rec.metric(t, "both", "relative_deviance", vec_id, (a - b).cwiseAbs().sum() / denom);
  }
}

bool recorded(const ExperimentConfig& c, std::size_t t, bool last) {
  return last || t % c.record_every == 0 ||
         std::find(c.checkpoints.begin(), c.checkpoints.end(), t) != c.checkpoints.end();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_ini_string(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  KeyMap run;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' must belong to a section");
    KeyMap* target = nullptr;
    if (section == "run") target = &run;
    else if (section == "design") target = &c.design;
    else if (section == "model") target = &c.knobs;
    else if (section == "data") target = &c.data;
    else throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      if (!node.empty()) throw ConfigError("nested keys are not supported: " + key);
      (*target)[key] = node.data();
    }
  }
  Keys k(run, "run", "any",
         {"model", "algorithm", "draws", "burnin", "replications", "seed", "record_every", "checkpoints",
          "store_draws", "accuracy_parameters", "ess_threshold"});
  c.model = k.text("model", "");
  c.algorithm = k.text("algorithm", c.algorithm);
  c.draws = k.count("draws", c.draws);
  c.burnin = k.count("burnin", c.burnin, 0);
  c.replications = static_cast<int>(k.count("replications", 1));
  c.seed = k.count("seed", c.seed, 0);
  c.record_every = k.count("record_every", c.record_every);
  if (k.has("checkpoints"))
    for (const auto& item : split_list(run.at("checkpoints"))) c.checkpoints.push_back(parse_count("checkpoints", item, 1));
  c.store_draws = k.flag("store_draws", false);
  c.accuracy_parameters = k.count("accuracy_parameters", c.accuracy_parameters, 0);
  c.ess_threshold = k.positive("ess_threshold", c.ess_threshold);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_ini(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_ini_string(buf.str());
}

void ExperimentConfig::validate() const {
  if (!kModels.count(model)) throw ConfigError("[run] model must be one of linreg, anova, dlm, probit, compressed, poisson");
  if (algorithm != "cdf" && algorithm != "smcmc" && algorithm != "both")
    throw ConfigError("[run] algorithm must be cdf, smcmc or both");
  if (model == "poisson" && algorithm != "cdf") throw ConfigError("poisson has no exact sampler; use algorithm = cdf");
  if (draws < 1) throw ConfigError("[run] draws must be >= 1");
  if (replications < 1) throw ConfigError("[run] replications must be >= 1");
  if (!data.empty()) {
    if (model != "probit" && model != "linreg") throw ConfigError("[data] input is supported for probit and linreg");
    if (!design.empty()) throw ConfigError("[design] and [data] are mutually exclusive");
    Keys k(data, "data", model, {"path", "schema"});
    for (const char* key : {"path", "schema"}) {
      if (!k.has(key)) throw ConfigError(std::string("[data] needs '") + key + "'");
      if (!std::filesystem::exists(k.text(key, ""))) throw ConfigError(std::string("[data] ") + key + " not found: " + k.text(key, ""));
    }
    CsvSchema::from_ini(k.text("schema", ""));
  }
  // Building replication 0 parses every design and model key, so a bad value fails
  // before any run starts. Generators are lazy, so this is cheap.
  try {
    build(*this, 0);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
}

std::size_t ExperimentConfig::horizon() const {
  if (!data.empty()) return 0;
  if (model == "linreg") return linreg_design(*this).horizon;
  if (model == "anova") return anova_design(*this).horizon;
  if (model == "dlm") return dlm_design(*this).horizon;
  if (model == "probit") return probit_design(*this).horizon;
  if (model == "compressed") return compressed_design(*this).horizon;
  return poisson_design(*this).horizon;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  out << "[run]\nmodel = " << model << "\nalgorithm = " << algorithm << "\ndraws = " << draws
      << "\nburnin = " << burnin << "\nreplications = " << replications << "\nseed = " << seed
      << "\nrecord_every = " << record_every << "\ncheckpoints = ";
  for (std::size_t i = 0; i < checkpoints.size(); ++i) out << (i ? ", " : "") << checkpoints[i];
  out << "\nstore_draws = " << (store_draws ? "true" : "false") << "\naccuracy_parameters = " << accuracy_parameters
      << "\ness_threshold = " << format_number(ess_threshold) << '\n';
  for (const auto& [name, section] : {std::pair<const char*, const KeyMap*>{"design", &design}, {"model", &knobs}, {"data", &data}}) {
    if (section->empty()) continue;
    out << '[' << name << "]\n";
    for (const auto& [k, v] : *section) out << k << " = " << trim(v) << '\n';
  }
  return out.str();
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 14695981039346656037ull;  // FNV-1a
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

RunOutput run_replication(const ExperimentConfig& c, int rep) {
  RunOutput out;
  Setup setup = build(c, rep);
  out.warnings = setup.warnings;
  EngineConfig engine{c.draws, c.burnin};
  const auto r = static_cast<std::uint32_t>(rep);

  std::vector<AlgorithmRun> runs;
  if (c.runs_cdf()) {
    AlgorithmRun a;
    a.label = "cdf";
    a.model = setup.cdf.get();
    a.state = SamplerState(RngStream::derive(c.seed, r, kSlotCdf));
    a.metrics_rng = RngStream::derive(c.seed, r, kSlotMetrics);
    runs.push_back(std::move(a));
  }
  if (c.runs_exact()) {
    AlgorithmRun a;
    a.label = "smcmc";
    a.model = setup.exact.get();
    a.state = SamplerState(RngStream::derive(c.seed, r, kSlotExact));
    a.metrics_rng = RngStream::derive(c.seed, r, kSlotMetricsExact);
    runs.push_back(std::move(a));
  }
  Recorder rec(c, rep, out);

  auto read_shard = [&](std::size_t index) -> std::optional<Shard> {
    try {
      return setup.source->next();
    } catch (const std::exception& e) {
      throw StreamError(index, "reading shard " + std::to_string(index) + ": " + e.what());
    }
  };
  std::optional<Shard> current = read_shard(1);
  if (!current) throw StreamError(0, "empty stream");
  std::size_t t = 0;
  while (current) {
    std::optional<Shard> upcoming = read_shard(t + 2);
    const bool last = !upcoming;
    ++t;
    const Shard& shard = *current;
    for (auto& a : runs) {
      if (setup.from_csv && c.model == "probit" && a.state.t > 0) {
        const Vector& beta = a.state.estimate("beta");
        const Vector eta = shard.X * beta;
        for (Eigen::Index i = 0; i < eta.size(); ++i) a.shard_errors += ((eta(i) > 0.0 ? 1.0 : -1.0) != shard.y(i));
        a.shard_rows += static_cast<double>(eta.size());
      }
      const auto start = std::chrono::steady_clock::now();
      try {
        a.batch = step_shard(a.state, shard, *a.model, engine);
      } catch (const StreamError&) {
        throw;
      } catch (const std::exception& e) {
        throw StreamError(t, a.label + " shard " + std::to_string(t) + ": " + e.what());
      }
      a.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      a.peak = std::max(a.peak, a.model->retained_bytes(a.state));
      const bool rec_now = recorded(c, t, last);
      if ((c.model == "linreg" || c.model == "anova") && !setup.from_csv) {
        const CoverageResult cov = interval_coverage(a.batch.at(setup.primary), setup.sim.truth.at(setup.primary));
        a.coverage_sum += cov.coverage;
        a.length_sum += cov.mean_length;
        a.few_draws = a.few_draws || cov.few_draws;
        ++a.coverage_shards;
      }
      if (c.model == "dlm")
        a.latent.update(a.batch.at("theta"), Dlm::window_first(a.state), t, rec_now,
                        static_cast<const Dlm&>(*a.model), a.state);
      if (c.model == "compressed")
        a.ess.update(a.batch.at("gamma"), setup.sim.x_test, setup.sim.y_test, t, c.ess_threshold);
      if (rec_now) {
        rec.parameters(t, a.label, a.batch, a.state, setup, c.model == "dlm");
        model_metrics(c, setup, a, rec);
      }
    }
    if (runs.size() == 2 && recorded(c, t, last)) paired_metrics(c, setup, runs[0], runs[1], rec);
    current = std::move(upcoming);
  }
  out.shards = t;
  for (const auto& a : runs) {
    out.seconds[a.label].push_back(a.seconds);
    out.peak_bytes[a.label] = a.peak;
  }
  if (auto* csv = dynamic_cast<CsvShardSource*>(setup.source.get())) {
    for (const auto& w : csv->warnings()) out.warnings.push_back(w);
    if (csv->rows_dropped() > 0)
      out.warnings.push_back(std::to_string(csv->rows_dropped()) + " rows with missing fields dropped");
  }
  return out;
}

RunOutput run_experiment(const ExperimentConfig& c, int threads) {
  c.validate();
  const int reps = c.replications;
  std::vector<RunOutput> parts(static_cast<std::size_t>(reps));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(reps));
  const int workers = std::max(1, std::min(threads, reps));
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int rep = 0; rep < reps; ++rep) {
    try {
      parts[static_cast<std::size_t>(rep)] = run_replication(c, rep);
    } catch (...) {
      errors[static_cast<std::size_t>(rep)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  RunOutput all;
  for (auto& p : parts) {
    all.estimates.insert(all.estimates.end(), p.estimates.begin(), p.estimates.end());
    all.metrics.insert(all.metrics.end(), p.metrics.begin(), p.metrics.end());
    all.summaries.insert(all.summaries.end(), p.summaries.begin(), p.summaries.end());
    all.draws.insert(all.draws.end(), p.draws.begin(), p.draws.end());
    for (const auto& [alg, secs] : p.seconds) all.seconds[alg].insert(all.seconds[alg].end(), secs.begin(), secs.end());
    for (const auto& [alg, bytes] : p.peak_bytes) all.peak_bytes[alg] = std::max(all.peak_bytes[alg], bytes);
    all.shards = p.shards;
    for (const auto& w : p.warnings)
      if (std::find(all.warnings.begin(), all.warnings.end(), w) == all.warnings.end()) all.warnings.push_back(w);
  }
  return all;
}

std::vector<Shard> simulate_design(const ExperimentConfig& c, int rep) {
  c.validate();
  if (!c.data.empty()) throw ConfigError("simulate needs a [design], not [data]");
  Setup setup = build(c, rep);
  return collect(*setup.source);
}

void write_run(const RunOutput& out, const ExperimentConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("estimates.csv");
    f << "rep,t,algorithm,parameter,estimate\n";
    for (const auto& e : out.estimates)
      f << e.rep << ',' << e.t << ',' << e.algorithm << ',' << e.parameter << ',' << format_number(e.estimate) << '\n';
  }
  {
    auto f = open("metrics.csv");
    f << "rep,t,algorithm,metric,parameter,value,stderr,flag\n";
    for (const auto& m : out.metrics)
      f << m.rep << ',' << m.t << ',' << m.algorithm << ',' << m.metric << ',' << m.parameter << ','
        << format_number(m.value) << ',' << format_number(m.stderr_) << ',' << m.flag << '\n';
  }
  {
    auto f = open("draws_summary.csv");
    f << "rep,t,algorithm,parameter,q2.5,q50,q97.5\n";
    for (const auto& s : out.summaries)
      f << s.rep << ',' << s.t << ',' << s.algorithm << ',' << s.parameter << ',' << format_number(s.q025) << ','
        << format_number(s.q50) << ',' << format_number(s.q975) << '\n';
  }
  if (c.store_draws) {
    auto f = open("draws.csv");
    f << "rep,t,algorithm,parameter,draw,value\n";
    for (const auto& d : out.draws)
      f << d.rep << ',' << d.t << ',' << d.algorithm << ',' << d.parameter << ',' << d.draw << ','
        << format_number(d.value) << '\n';
  }
  nlohmann::ordered_json m;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(c.hash()));
  m["version"] = version_string();
  m["config_hash"] = hash;
  m["config"] = c.canonical();
  m["model"] = c.model;
  m["algorithm"] = c.algorithm;
  m["replications"] = c.replications;
  m["shards"] = out.shards;
  m["seconds"] = out.seconds;
  m["peak_scss_bytes"] = out.peak_bytes;
  m["warnings"] = out.warnings;
  auto f = open("manifest.json");
  f << m.dump(2) << '\n';
}

}  // namespace cdf
