#include "cdf/models/linreg.hpp"

#include "cdf/distributions.hpp"
#include "cdf/error.hpp"
#include "cdf/kernels.hpp"

namespace cdf {

GaussianConditional linreg_beta_conditional(const Matrix& c11, const Vector& c12) {
  Matrix prec = c11 + Matrix::Identity(c11.rows(), c11.cols());
  symmetrize(prec);
  SpdMatrix q(prec);
  Matrix cov = q.inverse();
  symmetrize(cov);
  return {q.solve(c12), cov};
}

InvGammaConditional linreg_sigma2_conditional(const LinRegPrior& prior, double nt, double syy,
                                              double c22, double c21) {
  return checked_invgamma(prior.a + 0.5 * nt, prior.b + 0.5 * (syy - 2.0 * c22 + c21),
                          "linreg sigma2");
}

void LinRegCdf::validate_shard(const Shard& shard, const SamplerState&) const {
  require_regression_shard(shard, p_, name());
}

void LinRegCdf::initialize(SamplerState& state, const Shard& first) {
  state.declare_matrix("C11", p_, p_);
  state.declare_vector("C12", p_);
  state.declare_scalar("C21");
  state.declare_scalar("C22");
  state.declare_scalar("SYY");
  state.declare_scalar("nt");
  state.estimates["beta"] = Vector::Zero(p_);
  double start = 1.0;
  if (first_shard_start_ && first.n() > 1) {
    const double v = (first.y.array() - first.y.mean()).square().sum() / static_cast<double>(first.n() - 1);
    if (v > 0.0) start = v;
  }
  state.estimates["sigma2"] = Vector::Constant(1, frozen_sigma2_ > 0.0 ? frozen_sigma2_ : start);
}

void LinRegCdf::update_scss(std::size_t group, const Shard& shard, SamplerState& state) {
  if (group == 0) {
    const double s2 = state.scalar_estimate("sigma2");
    if (!(s2 > 0.0)) throw InvalidStateError("linreg: sigma2 estimate must be positive");
    state.update_stat("C11", [&](Matrix& c) { kernels::gram_accumulate(c, shard.X, 1.0 / s2); });
    state.update_stat("C12", [&](Matrix& c) {
      Vector v = c.col(0);
      kernels::crossprod_accumulate(v, shard.X, shard.y, 1.0 / s2);
      c.col(0) = v;
    });
    state.update_stat("SYY", [&](Matrix& c) { c(0, 0) += shard.y.squaredNorm(); });
    state.update_stat("nt", [&](Matrix& c) { c(0, 0) += static_cast<double>(shard.n()); });
    return;
  }
  const Vector& beta = state.estimate("beta");
  const Vector xb = shard.X * beta;
  state.update_stat("C21", [&](Matrix& c) { c(0, 0) += xb.squaredNorm(); });
  state.update_stat("C22", [&](Matrix& c) { c(0, 0) += xb.dot(shard.y); });
}

void LinRegCdf::sample(std::size_t group, const Shard&, SamplerState& state,
                       const EngineConfig& config, DrawBatch& batch) {
  if (group == 0) {
    const auto cond = linreg_beta_conditional(state.matrix("C11"), state.vector("C12"));
    const SpdMatrix cov(cond.cov);
    batch.resize("beta", draw_rows(config), p_);
    for_each_sweep(config, [&](long s) { record(batch, "beta", s, sample_mvn(cond.mean, cov, state.rng)); });
    return;
  }
  batch.resize("sigma2", draw_rows(config), 1);
  if (frozen_sigma2_ > 0.0) {
    batch.draws["sigma2"].setConstant(frozen_sigma2_);
    return;
  }
  const auto ig = linreg_sigma2_conditional(prior_, state.scalar("nt"), state.scalar("SYY"),
                                            state.scalar("C22"), state.scalar("C21"));
  for_each_sweep(config, [&](long s) {
    record(batch, "sigma2", s, sample_invgamma(ig.shape, ig.rate, state.rng));
  });
}

void LinRegExact::validate_shard(const Shard& shard, const SamplerState&) const {
  require_regression_shard(shard, p_, name());
}

void LinRegExact::initialize(SamplerState& state, const Shard&) {
  state.declare_matrix("SXX", p_, p_);
  state.declare_vector("SXY", p_);
  state.declare_scalar("SYY");
  state.declare_scalar("nt");
  state.aux["beta"] = Matrix::Zero(p_, 1);
  state.aux["sigma2"] = Matrix::Constant(1, 1, fixed_sigma2_ > 0.0 ? fixed_sigma2_ : 1.0);
  state.estimates["beta"] = Vector::Zero(p_);
  state.estimates["sigma2"] = Vector::Ones(1);
}

void LinRegExact::update_scss(std::size_t, const Shard& shard, SamplerState& state) {
  state.update_stat("SXX", [&](Matrix& c) { kernels::gram_accumulate(c, shard.X); });
  state.update_stat("SXY", [&](Matrix& c) {
    Vector v = c.col(0);
    kernels::crossprod_accumulate(v, shard.X, shard.y);
    c.col(0) = v;
  });
  state.update_stat("SYY", [&](Matrix& c) { c(0, 0) += shard.y.squaredNorm(); });
  state.update_stat("nt", [&](Matrix& c) { c(0, 0) += static_cast<double>(shard.n()); });
}

void LinRegExact::sample(std::size_t, const Shard&, SamplerState& state,
                         const EngineConfig& config, DrawBatch& batch) {
  const Matrix& sxx = state.matrix("SXX");
  const Vector sxy = state.vector("SXY");
  const double syy = state.scalar("SYY");
  const double nt = state.scalar("nt");
  Vector beta = state.aux_at("beta").col(0);
  double sigma2 = state.aux_at("sigma2")(0, 0);
  batch.resize("beta", draw_rows(config), p_);
  batch.resize("sigma2", draw_rows(config), 1);
  for_each_sweep(config, [&](long s) {
    Matrix prec = sxx / sigma2 + Matrix::Identity(p_, p_);
    symmetrize(prec);
    beta = sample_mvn_precision(SpdMatrix(prec), sxy / sigma2, state.rng);
    if (fixed_sigma2_ <= 0.0) {
      const auto ig = linreg_sigma2_conditional(prior_, nt, syy, beta.dot(sxy), beta.dot(sxx * beta));
      sigma2 = sample_invgamma(ig.shape, ig.rate, state.rng);
    }
    record(batch, "beta", s, beta);
    record(batch, "sigma2", s, sigma2);
  });
  state.aux_at("beta").col(0) = beta;
  state.aux_at("sigma2")(0, 0) = sigma2;
}

}  // namespace cdf
