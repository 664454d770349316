#include "cdf/models/poisson_vb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdf/error.hpp"

namespace cdf {

namespace {

double max_relative_change(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a(i) - b(i)) / std::max(1.0, std::abs(b(i))));
  }
  return m;
}

// Per-row exponent c_i' mu + c_i' Sigma c_i / 2.
Vector exponents(const Matrix& c, const Vector& mu, const Matrix& sigma) {
  const Matrix cs = c * sigma;
  return c * mu + 0.5 * cs.cwiseProduct(c).rowwise().sum();
}

Matrix inverse_spd(const Matrix& a) {
  Matrix s = a;
  symmetrize(s);
  Matrix inv = SpdMatrix(s).inverse();
  symmetrize(inv);
  return inv;
}

}  // namespace

HyperUpdate poisson_vb_hyper_step(double mu_inv_sigma2, double a, double k_s,
                                  double u_sq_plus_trace) {
  HyperUpdate h;
  h.mu_inv_b = 1.0 / (mu_inv_sigma2 + 1.0 / (a * a));
  h.mu_inv_sigma2 = (k_s + 1.0) / (2.0 * h.mu_inv_b + u_sq_plus_trace);
  return h;
}

PoissonVb::PoissonVb(PoissonVbConfig config) : cfg_(std::move(config)) {
  if (cfg_.a.size() != cfg_.random_sizes.size()) {
    throw ArgumentError("poisson_vb: need one a_s per random-effect component");
  }
  dim_ = cfg_.fixed_effects +
         std::accumulate(cfg_.random_sizes.begin(), cfg_.random_sizes.end(), Eigen::Index{0});
}

std::size_t PoissonVb::last_iterations(const SamplerState& state) {
  return static_cast<std::size_t>(state.aux_at("iterations")(0, 0));
}

Matrix PoissonVb::design(const Shard& shard) {
  Matrix c(shard.n(), shard.X.cols() + shard.Z.cols());
  c << shard.X, shard.Z;
  return c;
}

Matrix PoissonVb::penalty(const SamplerState& state) const {
  Vector d(dim_);
  d.head(cfg_.fixed_effects).setConstant(1.0 / cfg_.sigma_beta2);
  const Vector& inv_s2 = state.estimate("mu_inv_sigma2");
  Eigen::Index pos = cfg_.fixed_effects;
  for (std::size_t s = 0; s < cfg_.random_sizes.size(); ++s) {
    d.segment(pos, cfg_.random_sizes[s]).setConstant(inv_s2(static_cast<Eigen::Index>(s)));
    pos += cfg_.random_sizes[s];
  }
  return d.asDiagonal();
}

void PoissonVb::validate_shard(const Shard& shard, const SamplerState&) const {
  if (shard.X.cols() != cfg_.fixed_effects || shard.Z.cols() != dim_ - cfg_.fixed_effects) {
    throw ShardShapeError("poisson_vb: design has " + std::to_string(shard.X.cols()) + " + " +
                          std::to_string(shard.Z.cols()) + " columns, expected " +
                          std::to_string(cfg_.fixed_effects) + " + " +
                          std::to_string(dim_ - cfg_.fixed_effects));
  }
  if (shard.X.rows() != shard.n() || shard.Z.rows() != shard.n()) {
    throw ShardShapeError("poisson_vb: X, Z and y row counts differ");
  }
  for (Eigen::Index i = 0; i < shard.n(); ++i) {
    const double v = shard.y(i);
    if (v < 0.0 || v != std::floor(v)) throw ShardShapeError("poisson_vb: counts must be non-negative integers");
  }
}

void PoissonVb::initialize(SamplerState& state, const Shard& first) {
  const auto r = static_cast<Eigen::Index>(cfg_.random_sizes.size());
  state.declare_vector("C11", dim_);
  state.declare_vector("C12", dim_);
  state.declare_matrix("C13", dim_, dim_);
  state.estimates["mu"] = Vector::Zero(dim_);
  state.estimates["mu_inv_sigma2"] = Vector::Ones(r);
  Vector inv_b(r);
  for (Eigen::Index s = 0; s < r; ++s) inv_b(s) = 1.0 / (1.0 + 1.0 / (cfg_.a[static_cast<std::size_t>(s)] * cfg_.a[static_cast<std::size_t>(s)]));
  state.estimates["mu_inv_b"] = inv_b;
  // Starting covariance: the curvature at mu = 0 (w = 1) of the first shard plus the prior.
  const Matrix c = design(first);
  state.aux["Sigma"] = inverse_spd(c.transpose() * c + penalty(state));
  state.estimates["Sigma"] = Eigen::Map<const Vector>(state.aux_at("Sigma").data(), dim_ * dim_);
  state.aux["iterations"] = Matrix::Zero(1, 1);
}

void PoissonVb::update_scss(std::size_t group, const Shard& shard, SamplerState& state) {
  if (group == 0) return;
  // Fold the shard with w at the converged mean and covariance.
  const Matrix c = design(shard);
  const Vector w = exponents(c, state.estimate("mu"), state.aux_at("Sigma")).array().exp();
  state.update_stat("C11", [&](Matrix& m) { m.col(0).noalias() += c.transpose() * shard.y; });
  state.update_stat("C12", [&](Matrix& m) { m.col(0).noalias() += c.transpose() * w; });
  state.update_stat("C13", [&](Matrix& m) { m.noalias() += c.transpose() * w.asDiagonal() * c; });
}

void PoissonVb::sample(std::size_t group, const Shard& shard, SamplerState& state,
                       const EngineConfig&, DrawBatch& batch) {
  const bool empty = shard.n() == 0;
  if (group == 0) {
    const Matrix c = design(shard);
    const Matrix d = penalty(state);
    const Vector h1 = state.vector("C11") + c.transpose() * shard.y;
    const Vector& c12 = state.vector("C12");
    const Matrix& c13 = state.matrix("C13");
    Vector mu = state.estimate("mu");
    const Vector anchor = mu;
    Matrix sigma = state.aux_at("Sigma");
    std::size_t it = 0;
    for (; !empty && it < cfg_.max_iterations; ++it) {
      const Vector expo = exponents(c, mu, sigma);
      if (expo.size() > 0 && expo.maxCoeff() > cfg_.exponent_limit) {
        throw NumericOverflowError("w", "poisson_vb: exp(" + std::to_string(expo.maxCoeff()) +
                                            ") exceeds the overflow guard");
      }
      const Vector w = expo.array().exp();
      const Vector h2 = c12 + c.transpose() * w;
      const Matrix h3 = c13 + c.transpose() * w.asDiagonal() * c;
      // Curvature first, so the mean moves by a Newton step at the current point.
      Matrix next_sigma = inverse_spd(h3 + d);
      const Vector step = next_sigma * (h1 - h2 - d * mu);
      const Vector& base = cfg_.anchor_previous_shard ? anchor : mu;
      Vector next = base + step;
      int halvings = 0;
      while (exponents(c, next, next_sigma).maxCoeff() > cfg_.exponent_limit) {
        if (++halvings > cfg_.max_halvings) {
          throw NumericOverflowError("w", "poisson_vb: w overflows after " +
                                              std::to_string(cfg_.max_halvings) + " step halvings");
        }
        next = base + std::ldexp(1.0, -halvings) * step;
      }
      const double change =
          std::max(max_relative_change(next, mu),
                   max_relative_change(Eigen::Map<const Vector>(next_sigma.data(), next_sigma.size()),
                                       Eigen::Map<const Vector>(sigma.data(), sigma.size())));
      mu = std::move(next);
      sigma = std::move(next_sigma);
      if (change < cfg_.tolerance) {
        ++it;
        break;
      }
    }
    state.aux_at("iterations")(0, 0) = static_cast<double>(it);
    state.estimates["mu"] = mu;
    state.aux_at("Sigma") = sigma;
    batch.resize("mu", 1, dim_);
    batch.draws["mu"].row(0) = mu.transpose();
    batch.resize("Sigma", 1, dim_ * dim_);
    batch.draws["Sigma"].row(0) = Eigen::Map<const Vector>(sigma.data(), sigma.size()).transpose();
    return;
  }
  const auto r = static_cast<Eigen::Index>(cfg_.random_sizes.size());
  const Vector& mu = state.estimate("mu");
  const Matrix& sigma = state.aux_at("Sigma");
  Vector inv_b = state.estimate("mu_inv_b");
  Vector inv_s2 = state.estimate("mu_inv_sigma2");
  Eigen::Index pos = cfg_.fixed_effects;
  for (Eigen::Index s = 0; s < r; ++s) {
    const Eigen::Index ks = cfg_.random_sizes[static_cast<std::size_t>(s)];
    const double quad = mu.segment(pos, ks).squaredNorm() + sigma.diagonal().segment(pos, ks).sum();
    for (std::size_t it = 0; !empty && it < cfg_.max_iterations; ++it) {
      const auto h = poisson_vb_hyper_step(inv_s2(s), cfg_.a[static_cast<std::size_t>(s)],
                                           static_cast<double>(ks), quad);
      const double change = std::max(std::abs(h.mu_inv_b - inv_b(s)) / std::max(1.0, inv_b(s)),
                                     std::abs(h.mu_inv_sigma2 - inv_s2(s)) / std::max(1.0, inv_s2(s)));
      inv_b(s) = h.mu_inv_b;
      inv_s2(s) = h.mu_inv_sigma2;
      if (change < cfg_.tolerance) break;
    }
    pos += ks;
  }
  batch.resize("mu_inv_b", 1, r);
  batch.draws["mu_inv_b"].row(0) = inv_b.transpose();
  batch.resize("mu_inv_sigma2", 1, r);
  batch.draws["mu_inv_sigma2"].row(0) = inv_s2.transpose();
}

bool PoissonVb::closed_form_estimates(std::size_t group, SamplerState& state,
                                      const DrawBatch& batch) {
  if (group == 0) {
    const Matrix& s = state.aux_at("Sigma");
    state.estimates["Sigma"] = Eigen::Map<const Vector>(s.data(), s.size());
    return true;
  }
  state.estimates["mu_inv_b"] = batch.mean("mu_inv_b");
  state.estimates["mu_inv_sigma2"] = batch.mean("mu_inv_sigma2");
  return true;
}

}  // namespace cdf
