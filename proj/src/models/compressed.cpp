#include "cdf/models/compressed.hpp"

#include <algorithm>
#include <cmath>

#include "cdf/distributions.hpp"
#include "cdf/error.hpp"
#include "cdf/kernels.hpp"

namespace cdf {

namespace {

double sample_variance(const Vector& y) {
  if (y.size() < 2) return 1.0;
  const double m = y.mean();
  const double v = (y.array() - m).square().sum() / static_cast<double>(y.size() - 1);
  return v > 0.0 ? v : 1.0;
}

// Draws N(P^{-1} h, P^{-1}) for a small SPD precision P, reusing `llt`.
void draw_column(Eigen::LLT<Matrix>& llt, const Matrix& prec, const Vector& h, RngStream& rng,
                 Eigen::Ref<Vector> out, Eigen::Index column) {
  llt.compute(prec);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(static_cast<std::size_t>(column),
                             "compressed: column " + std::to_string(column) +
                                 " precision is not positive definite");
  }
  Vector z = standard_normal_vector(prec.rows(), rng);
  llt.matrixU().solveInPlace(z);
  out = llt.solve(h) + z;
}

void draw_kappa(const Matrix& phi, const Matrix& phi0, const CompressedPrior& prior,
                RngStream& rng, Vector& kappa) {
  const double p = static_cast<double>(phi.cols());
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    const double dev = (phi.row(i) - phi0.row(i)).squaredNorm();
    kappa(i) = sample_invgamma(0.5 * (prior.c + p), 0.5 * (prior.d + dev), rng);
  }
}

void require_compressed_shard(const Shard& shard, Eigen::Index p, const std::string& model) {
  require_regression_shard(shard, p, model);
}

}  // namespace

Eigen::Index compressed_default_m(Eigen::Index p) {
  const auto lg = static_cast<Eigen::Index>(std::ceil(std::log(static_cast<double>(p))));
  return std::max<Eigen::Index>(10, lg);
}

Matrix make_projection_prior(Eigen::Index m, Eigen::Index p, RngStream& rng) {
  if (m < 1 || m > p) throw ArgumentError("projection prior needs 1 <= m <= p");
  Matrix phi(m, p);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < p; ++j) phi(i, j) = rng.normal();
  // modified Gram-Schmidt over rows, applied twice for orthogonality to working precision
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index k = 0; k < i; ++k) phi.row(i) -= phi.row(i).dot(phi.row(k)) * phi.row(k);
      const double nrm = phi.row(i).norm();
      if (!(nrm > 1e-12)) throw DegeneracyError("projection prior: rank deficient draw");
      phi.row(i) /= nrm;
    }
  }
  return phi;
}

BetaSigmaConditional compressed_beta_sigma(const Matrix& c11, const Vector& c12, double fyy,
                                           double nt) {
  Matrix w = c11 + Matrix::Identity(c11.rows(), c11.cols());
  symmetrize(w);
  SpdMatrix ws(w);
  BetaSigmaConditional out;
  out.mean = ws.solve(c12);
  out.w_inv = ws.inverse();
  symmetrize(out.w_inv);
  out.a1 = nt;
  out.b1 = fyy - c12.dot(out.mean);
  if (nt > 0.0 && !(out.b1 > 0.0)) {
    throw DegeneracyError("compressed: b1 = " + std::to_string(out.b1) + " is not positive");
  }
  return out;
}

void compressed_draw_beta_sigma(const BetaSigmaConditional& cond, const SpdMatrix& w_inv,
                                RngStream& rng, Vector& beta, double& sigma2) {
  if (cond.a1 > 0.0) {
    sigma2 = sample_invgamma(0.5 * cond.a1, 0.5 * cond.b1, rng);
  } else {
    sigma2 = sample_invgamma(0.5, 0.5, rng);
  }
  beta = cond.mean + std::sqrt(sigma2) * w_inv.lower_times(standard_normal_vector(cond.mean.size(), rng));
}

std::size_t CompressedCdf::w_factorizations(const SamplerState& state) {
  return static_cast<std::size_t>(state.aux_at("w_factorizations")(0, 0));
}

void CompressedCdf::validate_shard(const Shard& shard, const SamplerState&) const {
  require_compressed_shard(shard, p(), name());
}

void CompressedCdf::initialize(SamplerState& state, const Shard& first) {
  const Eigen::Index m = this->m(), p = this->p();
  state.declare_matrix("C11", m, m);
  state.declare_vector("C12", m);
  state.declare_scalar("Fyy");
  state.declare_scalar("nt");
  state.declare_matrix("C21", m, m * p);
  state.declare_matrix("C22", m, p);
  state.aux["Phi"] = phi0_;
  state.aux["kappa"] = Matrix::Ones(m, 1);
  state.aux["w_factorizations"] = Matrix::Zero(1, 1);
  state.estimates["beta"] = Vector::Zero(m);
  state.estimates["sigma2"] = Vector::Constant(1, sample_variance(first.y));
  state.estimates["Phi"] = Eigen::Map<const Vector>(phi0_.data(), m * p);
  state.estimates["kappa"] = Vector::Ones(m);
  state.estimates["gamma"] = Vector::Zero(p);
}

void CompressedCdf::update_scss(std::size_t group, const Shard& shard, SamplerState& state) {
  const Eigen::Index m = this->m(), p = this->p();
  const Eigen::Map<const Matrix> phi_hat(state.estimate("Phi").data(), m, p);
  if (group == 0) {
    const Matrix u = shard.X * phi_hat.transpose();  // n x m projected design
    state.update_stat("C11", [&](Matrix& c) { kernels::gram_accumulate(c, u); });
    state.update_stat("C12", [&](Matrix& c) { c.col(0).noalias() += u.transpose() * shard.y; });
    state.update_stat("Fyy", [&](Matrix& c) { c(0, 0) += shard.y.squaredNorm(); });
    state.update_stat("nt", [&](Matrix& c) { c(0, 0) += static_cast<double>(shard.n()); });
    return;
  }
  const Vector& beta = state.estimate("beta");
  const Vector gamma = phi_hat.transpose() * beta;
  const Vector resid = shard.y - shard.X * gamma;
  const Matrix bb = beta * beta.transpose();
  const Vector col_sq = shard.X.colwise().squaredNorm().transpose();
  state.update_stat("C21", [&](Matrix& c) {
    for (Eigen::Index j = 0; j < p; ++j) c.middleCols(j * m, m) += col_sq(j) * bb;
  });
  state.update_stat("C22", [&](Matrix& c) {
    const Vector partial = shard.X.transpose() * resid + col_sq.cwiseProduct(gamma);
    c.noalias() += beta * partial.transpose();
  });
}

void CompressedCdf::sample(std::size_t group, const Shard&, SamplerState& state,
                           const EngineConfig& config, DrawBatch& batch) {
  const Eigen::Index m = this->m(), p = this->p();
  if (group == 0) {
    const auto cond = compressed_beta_sigma(state.matrix("C11"), state.vector("C12"),
                                            state.scalar("Fyy"), state.scalar("nt"));
    state.aux_at("w_factorizations")(0, 0) += 1.0;
    const SpdMatrix w_inv(cond.w_inv);
    batch.resize("beta", draw_rows(config), m);
    batch.resize("sigma2", draw_rows(config), 1);
    Vector beta(m);
    double sigma2 = 0.0;
    for_each_sweep(config, [&](long s) {
      compressed_draw_beta_sigma(cond, w_inv, state.rng, beta, sigma2);
      record(batch, "beta", s, beta);
      record(batch, "sigma2", s, sigma2);
    });
    state.aux["beta_mean"] = cond.mean;
    state.aux["sigma2_map"] = Matrix::Constant(1, 1, cond.a1 > 0.0 ? cond.b1 / (cond.a1 + 1.0)
                                                                      : state.scalar_estimate("sigma2"));
    return;
  }
  const double s2 = state.scalar_estimate("sigma2");
  const Matrix& c21 = state.matrix("C21");
  const Matrix& c22 = state.matrix("C22");
  Matrix& phi = state.aux_at("Phi");
  Vector kappa = state.aux_at("kappa").col(0);
  const Matrix& beta_draws = batch.at("beta");
  Matrix phi_sum = Matrix::Zero(m, p);
  Eigen::LLT<Matrix> llt(m);
  Matrix prec(m, m);
  Vector h(m);
  batch.resize("kappa", draw_rows(config), m);
  batch.resize("gamma", draw_rows(config), p);
  for_each_sweep(config, [&](long s) {
    const Vector kinv = kappa.cwiseInverse();
    for (Eigen::Index j = 0; j < p; ++j) {
      prec = c21.middleCols(j * m, m) / s2;
      prec.diagonal() += kinv;
      h = c22.col(j) / s2 + kinv.cwiseProduct(phi0_.col(j));
      draw_column(llt, prec, h, state.rng, phi.col(j), j);
    }
    draw_kappa(phi, phi0_, prior_, state.rng, kappa);
    if (s >= 0) {
      phi_sum += phi;
      batch.draws["kappa"].row(s) = kappa.transpose();
      batch.draws["gamma"].row(s) = (phi.transpose() * beta_draws.row(s).transpose()).transpose();
    }
  });
  state.aux_at("kappa").col(0) = kappa;
  phi_sum /= static_cast<double>(config.draws);
  state.aux["Phi_mean"] = std::move(phi_sum);
}

bool CompressedCdf::closed_form_estimates(std::size_t group, SamplerState& state,
                                          const DrawBatch& batch) {
  if (group == 0) {
    state.estimates["beta"] = state.aux_at("beta_mean").col(0);
    state.estimates["sigma2"] = Vector::Constant(1, state.aux_at("sigma2_map")(0, 0));
    return true;
  }
  const Matrix& pm = state.aux_at("Phi_mean");
  state.estimates["Phi"] = Eigen::Map<const Vector>(pm.data(), pm.size());
  state.estimates["kappa"] = batch.mean("kappa");
  state.estimates["gamma"] = batch.mean("gamma");
  return true;
}

void CompressedExact::validate_shard(const Shard& shard, const SamplerState&) const {
  require_compressed_shard(shard, phi0_.cols(), name());
}

void CompressedExact::initialize(SamplerState& state, const Shard& first) {
  const Eigen::Index m = phi0_.rows(), p = phi0_.cols();
  state.declare_matrix("FXX", p, p);
  state.declare_vector("FXy", p);
  state.declare_scalar("Fyy");
  state.declare_scalar("nt");
  state.aux["Phi"] = phi0_;
  state.aux["kappa"] = Matrix::Ones(m, 1);
  state.aux["beta"] = Matrix::Zero(m, 1);
  state.aux["sigma2"] = Matrix::Constant(1, 1, sample_variance(first.y));
  state.estimates["beta"] = Vector::Zero(m);
  state.estimates["sigma2"] = Vector::Constant(1, sample_variance(first.y));
  state.estimates["kappa"] = Vector::Ones(m);
  state.estimates["gamma"] = Vector::Zero(p);
}

void CompressedExact::update_scss(std::size_t, const Shard& shard, SamplerState& state) {
  state.update_stat("FXX", [&](Matrix& c) { kernels::gram_accumulate(c, shard.X); });
  state.update_stat("FXy", [&](Matrix& c) {
    Vector v = c.col(0);
    kernels::crossprod_accumulate(v, shard.X, shard.y);
    c.col(0) = v;
  });
  state.update_stat("Fyy", [&](Matrix& c) { c(0, 0) += shard.y.squaredNorm(); });
  state.update_stat("nt", [&](Matrix& c) { c(0, 0) += static_cast<double>(shard.n()); });
}

void CompressedExact::sample(std::size_t, const Shard&, SamplerState& state,
                             const EngineConfig& config, DrawBatch& batch) {
  const Eigen::Index m = phi0_.rows(), p = phi0_.cols();
  const Matrix& fxx = state.matrix("FXX");
  const Vector fxy = state.vector("FXy");
  const double fyy = state.scalar("Fyy");
  const double nt = state.scalar("nt");
  Matrix& phi = state.aux_at("Phi");
  Vector kappa = state.aux_at("kappa").col(0);
  Vector beta = state.aux_at("beta").col(0);
  double sigma2 = state.aux_at("sigma2")(0, 0);
  Eigen::LLT<Matrix> llt(m);
  Matrix prec(m, m);
  Vector h(m), col(m);
  const Vector fdiag = fxx.diagonal();
  for (const char* id : {"beta", "kappa"}) batch.resize(id, draw_rows(config), m);
  batch.resize("sigma2", draw_rows(config), 1);
  batch.resize("gamma", draw_rows(config), p);
  for_each_sweep(config, [&](long s) {
    // (beta, sigma2) | Phi
    const Matrix u = phi * fxx;  // m x p
    const Matrix c11 = u * phi.transpose();
    const auto cond = compressed_beta_sigma(c11, phi * fxy, fyy, nt);
    compressed_draw_beta_sigma(cond, SpdMatrix(cond.w_inv), state.rng, beta, sigma2);
    // Phi columns | beta, sigma2, K with gamma and v = FXX gamma kept current
    Vector gamma = phi.transpose() * beta;
    Vector v = fxx * gamma;
    const Matrix bb = beta * beta.transpose();
    const Vector kinv = kappa.cwiseInverse();
    for (Eigen::Index j = 0; j < p; ++j) {
      prec = bb * (fdiag(j) / sigma2);
      prec.diagonal() += kinv;
      const double partial = fxy(j) - (v(j) - fdiag(j) * gamma(j));
      h = beta * (partial / sigma2) + kinv.cwiseProduct(phi0_.col(j));
      draw_column(llt, prec, h, state.rng, col, j);
      phi.col(j) = col;
      const double g_new = col.dot(beta);
      const double delta = g_new - gamma(j);
      gamma(j) = g_new;
      v.noalias() += fxx.col(j) * delta;
    }
    draw_kappa(phi, phi0_, prior_, state.rng, kappa);
    record(batch, "beta", s, beta);
    record(batch, "sigma2", s, sigma2);
    record(batch, "kappa", s, kappa);
    record(batch, "gamma", s, gamma);
  });
  state.aux_at("kappa").col(0) = kappa;
  state.aux_at("beta").col(0) = beta;
  state.aux_at("sigma2")(0, 0) = sigma2;
}

bool CompressedExact::closed_form_estimates(std::size_t, SamplerState& state,
                                            const DrawBatch& batch) {
  state.estimates["gamma"] = batch.mean("gamma");
  return false;
}

}  // namespace cdf
