#include "cdf/models/probit.hpp"

#include <cmath>

#include "cdf/distributions.hpp"
#include "cdf/error.hpp"
#include "cdf/kernels.hpp"

namespace cdf {

namespace {

void append_rows(Matrix& dst, const Matrix& rows) {
  const Eigen::Index old = dst.rows();
  dst.conservativeResize(old + rows.rows(), rows.cols());
  dst.bottomRows(rows.rows()) = rows;
}

void drop_front(Matrix& m, Eigen::Index k) {
  const Eigen::Index keep = m.rows() - k;
  Matrix rest = m.bottomRows(keep);
  m = std::move(rest);
}

// One latent sweep over rows of x followed by beta | z ~ N(Sigma h, Sigma), Sigma = (SXX + I)^{-1}.
// `base` is the part of h that does not change within the sweep.
void gibbs_sweep(const SpdMatrix& sigma, const Vector& base, const Matrix& x, const Matrix& y,
                   Vector& beta, Vector& z, RngStream& rng) {
  const Vector eta = x * beta;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    z(i) = sample_truncnormal(eta(i), y(i, 0) > 0.0 ? 1 : -1, rng);
  }
  Vector h = base;
  h.noalias() += x.transpose() * z;
  beta = sample_mvn(sigma.matrix() * h, sigma, rng);
}

Matrix posterior_covariance(const Matrix& sxx) {
  Matrix prec = sxx + Matrix::Identity(sxx.rows(), sxx.cols());
  Matrix sigma = SpdMatrix(prec).inverse();
  symmetrize(sigma);
  return sigma;
}

}  // namespace

std::size_t probit_default_budget(Eigen::Index p) {
  const double v = static_cast<double>(p) * std::log(static_cast<double>(p));
  return static_cast<std::size_t>(std::ceil(v));
}

double probit_frozen_score(double linear_predictor, double y) {
  return truncnormal_mean(linear_predictor, y > 0.0 ? 1 : -1);
}

Vector probit_predict(const Matrix& beta_draws, const Matrix& x) {
  if (beta_draws.cols() != x.cols()) throw ArgumentError("probit_predict: dimension mismatch");
  const Matrix eta = x * beta_draws.transpose();
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < eta.cols(); ++d) s += std_normal_cdf(eta(i, d));
    out(i) = s / static_cast<double>(eta.cols());
  }
  return out;
}

void require_probit_shard(const Shard& shard, Eigen::Index p, const std::string& model) {
  require_regression_shard(shard, p, model);
  for (Eigen::Index i = 0; i < shard.n(); ++i) {
    if (shard.y(i) != 1.0 && shard.y(i) != -1.0) {
      throw ShardShapeError(model + ": responses must be coded -1 / +1");
    }
  }
}

std::size_t ProbitCdf::sigma_updates(const SamplerState& state) {
  return static_cast<std::size_t>(state.aux_at("sigma_updates")(0, 0));
}

void ProbitCdf::validate_shard(const Shard& shard, const SamplerState&) const {
  require_probit_shard(shard, p_, name());
  if (static_cast<std::size_t>(shard.n()) > budget_) {
    throw ShardShapeError("probit: shard size " + std::to_string(shard.n()) + " exceeds budget " +
                          std::to_string(budget_));
  }
}

void ProbitCdf::initialize(SamplerState& state, const Shard&) {
  state.declare_matrix("SXX", p_, p_);
  state.declare_vector("C", p_);
  state.aux["SigmaXX"] = Matrix::Identity(p_, p_);
  state.aux["Xw"] = Matrix(0, p_);
  state.aux["yw"] = Matrix(0, 1);
  state.aux["beta"] = Matrix::Zero(p_, 1);
  state.aux["sigma_updates"] = Matrix::Zero(1, 1);
  state.estimates["beta"] = Vector::Zero(p_);
}

void ProbitCdf::update_scss(std::size_t, const Shard& shard, SamplerState& state) {
  Matrix& xw = state.aux_at("Xw");
  Matrix& yw = state.aux_at("yw");
  const Eigen::Index excess =
      xw.rows() + shard.n() - static_cast<Eigen::Index>(budget_);
  const Vector& beta_hat = state.estimate("beta");
  Vector fold = Vector::Zero(p_);
  if (excess > 0) {
    for (Eigen::Index i = 0; i < excess; ++i) {
      const double zhat = probit_frozen_score(xw.row(i).dot(beta_hat), yw(i, 0));
      fold += zhat * xw.row(i).transpose();
    }
    drop_front(xw, excess);
    drop_front(yw, excess);
  }
  state.update_stat("C", [&](Matrix& c) { c.col(0) += fold; });
  state.update_stat("SXX", [&](Matrix& c) { kernels::gram_accumulate(c, shard.X); });
  state.aux_at("SigmaXX") = posterior_covariance(state.matrix("SXX"));
  state.aux_at("sigma_updates")(0, 0) += 1.0;
  append_rows(xw, shard.X);
  append_rows(yw, shard.y);
}

void ProbitCdf::sample(std::size_t, const Shard&, SamplerState& state, const EngineConfig& config,
                       DrawBatch& batch) {
  const Matrix& xw = state.aux_at("Xw");
  const Matrix& yw = state.aux_at("yw");
  const SpdMatrix q(state.aux_at("SigmaXX"));
  const Vector c = state.vector("C");
  Vector beta = state.aux_at("beta").col(0);
  Vector z(xw.rows());
  batch.resize("beta", draw_rows(config), p_);
  for_each_sweep(config, [&](long s) {
    gibbs_sweep(q, c, xw, yw, beta, z, state.rng);
    record(batch, "beta", s, beta);
  });
  state.aux_at("beta").col(0) = beta;
}

void ProbitExact::validate_shard(const Shard& shard, const SamplerState&) const {
  require_probit_shard(shard, p_, name());
}

void ProbitExact::initialize(SamplerState& state, const Shard&) {
  state.declare_matrix("SXX", p_, p_);
  state.aux["X"] = Matrix(0, p_);
  state.aux["y"] = Matrix(0, 1);
  state.aux["z"] = Matrix(0, 1);
  state.aux["beta"] = Matrix::Zero(p_, 1);
  state.estimates["beta"] = Vector::Zero(p_);
}

void ProbitExact::update_scss(std::size_t, const Shard& shard, SamplerState& state) {
  state.update_stat("SXX", [&](Matrix& c) { kernels::gram_accumulate(c, shard.X); });
  append_rows(state.aux_at("X"), shard.X);
  append_rows(state.aux_at("y"), shard.y);
  append_rows(state.aux_at("z"), Matrix::Zero(shard.n(), 1));
}

void ProbitExact::sample(std::size_t, const Shard&, SamplerState& state,
                         const EngineConfig& config, DrawBatch& batch) {
  const Matrix& x = state.aux_at("X");
  const Matrix& y = state.aux_at("y");
  const SpdMatrix q(posterior_covariance(state.matrix("SXX")));
  const Vector zero = Vector::Zero(p_);
  Vector beta = state.aux_at("beta").col(0);
  Vector z = state.aux_at("z").col(0);
  batch.resize("beta", draw_rows(config), p_);
  for_each_sweep(config, [&](long s) {
    gibbs_sweep(q, zero, x, y, beta, z, state.rng);
    record(batch, "beta", s, beta);
  });
  state.aux_at("beta").col(0) = beta;
  state.aux_at("z").col(0) = z;
}

}  // namespace cdf
