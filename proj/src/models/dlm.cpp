#include "cdf/models/dlm.hpp"

#include <cmath>
#include <limits>

#include "cdf/distributions.hpp"
#include "cdf/error.hpp"

namespace cdf {

double dlm_phi_log_target(double phi, double num, double den, double tau2) {
  if (!(std::abs(phi) < 1.0)) return -std::numeric_limits<double>::infinity();
  return -(den * phi * phi - 2.0 * num * phi) / (2.0 * tau2);
}

std::size_t Dlm::window_first(const SamplerState& state) {
  return static_cast<std::size_t>(state.aux_at("theta_first")(0, 0));
}

double Dlm::acceptance_rate(const SamplerState& state) {
  const Matrix& a = state.aux_at("mh_accept");
  return a(0, 1) > 0.0 ? a(0, 0) / a(0, 1) : 0.0;
}

NormalConditional dlm_latent_conditional(double prev, std::optional<double> next, double y,
                                         double phi, double tau2, double sigma2) {
  double prec = 1.0 / sigma2 + 1.0 / tau2;
  double lin = y / sigma2 + phi * prev / tau2;
  if (next) {
    prec += phi * phi / tau2;
    lin += phi * *next / tau2;
  }
  return {lin / prec, 1.0 / prec};
}

void Dlm::validate_shard(const Shard& shard, const SamplerState&) const {
  if (shard.y.size() != 1) throw ShardShapeError("dlm: each shard carries exactly one observation");
  if (cfg_.window < 1) throw ArgumentError("dlm: window must be at least 1");
}

void Dlm::initialize(SamplerState& state, const Shard&) {
  for (const char* id : {"C1", "C2", "C3", "C4"}) state.declare_scalar(id);
  // Window chain state: theta (current draws), y aligned with theta (y(0) unused for theta_0).
  state.aux["theta"] = Matrix::Zero(1, 1);
  state.aux["theta_mean"] = Matrix::Zero(1, 1);
  state.aux["y"] = Matrix::Zero(1, 1);
  state.aux["theta_first"] = Matrix::Zero(1, 1);
  state.aux["boundary"] = Matrix::Zero(1, 1);
  state.aux["params"] = (Matrix(1, 3) << 1.0, 1.0, 0.0).finished();  // tau2, sigma2, phi
  state.aux["mh_accept"] = Matrix::Zero(1, 2);
  state.estimates["theta"] = Vector::Zero(1);
  state.estimates["tau2"] = Vector::Ones(1);
  state.estimates["sigma2"] = Vector::Ones(1);
  state.estimates["phi"] = Vector::Zero(1);
}

void Dlm::update_scss(std::size_t, const Shard& shard, SamplerState& state) {
  Matrix& theta = state.aux_at("theta");
  Matrix& mean = state.aux_at("theta_mean");
  Matrix& y = state.aux_at("y");
  Matrix& first = state.aux_at("theta_first");
  Matrix& boundary = state.aux_at("boundary");
  const std::size_t t = state.t;
  const double phi = state.aux_at("params")(0, 2);

  // Retire the front of the window so that it holds theta_{t-b+1..t} (theta_0 included while t <= b).
  std::size_t f = static_cast<std::size_t>(first(0, 0));
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
  std::size_t drop = 0;
  while (t > cfg_.window && f + drop + cfg_.window < t + 1) {
    const std::size_t s = f + drop;
    const double th = mean(static_cast<Eigen::Index>(drop), 0);
    if (s > 0) {
      const double prev = drop > 0 ? mean(static_cast<Eigen::Index>(drop - 1), 0) : boundary(0, 0);
      const double r = y(static_cast<Eigen::Index>(drop), 0) - th;
      c1 += 0.5 * r * r;
      c2 += 0.5 * prev * prev;
      c3 += 0.5 * th * prev;
      c4 += 0.5 * th * th;
    }
    ++drop;
  }
  state.update_stat("C1", [&](Matrix& c) { c(0, 0) += c1; });
  state.update_stat("C2", [&](Matrix& c) { c(0, 0) += c2; });
  state.update_stat("C3", [&](Matrix& c) { c(0, 0) += c3; });
  state.update_stat("C4", [&](Matrix& c) { c(0, 0) += c4; });

  const Eigen::Index keep = theta.rows() - static_cast<Eigen::Index>(drop);
  if (drop > 0) {
    boundary(0, 0) = mean(static_cast<Eigen::Index>(drop - 1), 0);
    f += drop;
  }
  Matrix nt(keep + 1, 1), nm(keep + 1, 1), ny(keep + 1, 1);
  nt.topRows(keep) = theta.bottomRows(keep);
  nm.topRows(keep) = mean.bottomRows(keep);
  ny.topRows(keep) = y.bottomRows(keep);
  const double last = keep > 0 ? nt(keep - 1, 0) : boundary(0, 0);
  ny(keep, 0) = shard.y(0);
  // New latent starts between its prior prediction and the observation.
  nt(keep, 0) = 0.5 * (phi * last + shard.y(0));
  nm(keep, 0) = nt(keep, 0);
  theta = std::move(nt);
  mean = std::move(nm);
  y = std::move(ny);
  first(0, 0) = static_cast<double>(f);
}

void Dlm::sample(std::size_t, const Shard&, SamplerState& state, const EngineConfig& config,
                 DrawBatch& batch) {
  Matrix& theta_m = state.aux_at("theta");
  const Matrix& y = state.aux_at("y");
  const std::size_t f = window_first(state);
  const double bnd = state.aux_at("boundary")(0, 0);
  const bool has_origin = f == 0;
  const Eigen::Index len = theta_m.rows();
  const double t = static_cast<double>(state.t);
  const double C1 = state.scalar("C1"), C2 = state.scalar("C2"), C3 = state.scalar("C3"),
               C4 = state.scalar("C4");
  Matrix& params = state.aux_at("params");
  double tau2 = params(0, 0), sigma2 = params(0, 1), phi = params(0, 2);
  Matrix& acc = state.aux_at("mh_accept");

  const std::size_t mh_per_sweep =
      config.draws > 0 ? (cfg_.mh_steps + config.draws - 1) / config.draws : cfg_.mh_steps;
  batch.resize("theta", draw_rows(config), len);
  for (const char* id : {"tau2", "sigma2", "phi"}) batch.resize(id, draw_rows(config), 1);

  Vector th = theta_m.col(0);
  auto prev_of = [&](Eigen::Index i) { return i > 0 ? th(i - 1) : bnd; };

  for_each_sweep(config, [&](long s) {
    // (a) single-site updates across the window, oldest to newest
    for (Eigen::Index i = 0; i < len; ++i) {
      const bool last = i == len - 1;
      if (has_origin && i == 0) {
        double prec = 1.0 / prior_.h0;
        double lin = 0.0;
        if (!last) {
          prec += phi * phi / tau2;
          lin += phi * th(i + 1) / tau2;
        }
        th(i) = lin / prec + state.rng.normal() / std::sqrt(prec);
        continue;
      }
      const auto c = dlm_latent_conditional(prev_of(i), last ? std::nullopt : std::optional<double>(th(i + 1)),
                                            y(i, 0), phi, tau2, sigma2);
      th(i) = c.mean + std::sqrt(c.var) * state.rng.normal();
    }
    // window transitions and residuals
    double trans = 0.0, resid = 0.0, num = 0.0, den = 0.0;
    for (Eigen::Index i = has_origin ? 1 : 0; i < len; ++i) {
      const double p = prev_of(i);
      const double d = th(i) - phi * p;
      trans += d * d;
      num += th(i) * p;
      den += p * p;
      const double r = y(i, 0) - th(i);
      resid += r * r;
    }
    // (b) tau2
    const auto igt = checked_invgamma(prior_.c0 + 0.5 * t,
                                      prior_.d0 + C4 - 2.0 * phi * C3 + phi * phi * C2 + 0.5 * trans,
                                      "dlm tau2");
    tau2 = sample_invgamma(igt.shape, igt.rate, state.rng);
    // (c) sigma2
    const auto igs = checked_invgamma(prior_.a0 + 0.5 * t, prior_.b0 + C1 + 0.5 * resid, "dlm sigma2");
    sigma2 = sample_invgamma(igs.shape, igs.rate, state.rng);
    // (d) phi by random-walk Metropolis
    const double n_phi = 2.0 * C3 + num;
    const double d_phi = 2.0 * C2 + den;
    auto target = [&](double v) { return dlm_phi_log_target(v, n_phi, d_phi, tau2); };
    for (std::size_t m = 0; m < mh_per_sweep; ++m) {
      const auto res = metropolis_step(phi, target, RandomWalk{cfg_.mh_step_size}, state.rng);
      phi = res.value;
      acc(0, 0) += res.accepted ? 1.0 : 0.0;
      acc(0, 1) += 1.0;
    }
    record(batch, "theta", s, th);
    record(batch, "tau2", s, tau2);
    record(batch, "sigma2", s, sigma2);
    record(batch, "phi", s, phi);
  });

  theta_m.col(0) = th;
  state.aux_at("theta_mean").col(0) = batch.mean("theta");
  params(0, 0) = tau2;
  params(0, 1) = sigma2;
  params(0, 2) = phi;
}

}  // namespace cdf
