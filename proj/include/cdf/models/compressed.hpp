#pragma once

#include "cdf/models/common.hpp"
#include "cdf/rng.hpp"

namespace cdf {

// kappa_i ~ IG(c/2, d/2) prior; sigma2 and beta follow the marginalised
// conjugate form with Sigma_beta = I.
struct CompressedPrior {
  double c = 1.0;
  double d = 1.0;
};

// max(10, ceil(log p))
Eigen::Index compressed_default_m(Eigen::Index p);

// iid N(0, 1) entries with Gram-Schmidt orthonormalised rows (m <= p).
Matrix make_projection_prior(Eigen::Index m, Eigen::Index p, RngStream& rng);

struct BetaSigmaConditional {
  Vector mean;      // W^{-1} C12
  Matrix w_inv;     // W^{-1}
  double a1 = 0.0;  // nt
  double b1 = 0.0;  // Fyy - C12' W^{-1} C12
};

// W = C11 + I. Throws DegeneracyError when b1 <= 0 with data present.
BetaSigmaConditional compressed_beta_sigma(const Matrix& c11, const Vector& c12, double fyy,
                                           double nt);

// Draws sigma2 ~ IG(a1/2, b1/2) then beta | sigma2 ~ N(mean, sigma2 W^{-1}).
// With no data (nt = 0) returns sigma2 from the prior IG(1/2, 1/2) and beta ~ N(0, sigma2 I).
void compressed_draw_beta_sigma(const BetaSigmaConditional& cond, const SpdMatrix& w_inv,
                                RngStream& rng, Vector& beta, double& sigma2);

// Approximate sampler. Groups: {beta, sigma2}, {Phi, kappa}.
// Statistics: C11 (m x m), C12 (m), Fyy, nt, C21 (m x m*p, block j = sum beta beta' X_j'X_j),
// C22 (m x p, column j = sum beta_hat X_j'(y - X gamma_hat + X_j gamma_hat_j)).
// Column j of Phi is drawn from N(P^{-1}(C22_j / s2 + K^{-1} Phi0_j), P^{-1}) with
// P = C21_j / s2 + K^{-1}, the partial residual being frozen at the estimates of the shard.
// Draw batch: beta, sigma2, kappa and gamma = Phi' beta (Phi itself is summarised by its mean).
class CompressedCdf final : public ModelHooks {
 public:
  CompressedCdf(Matrix phi0, CompressedPrior prior = {})
      : phi0_(std::move(phi0)), prior_(prior) {}

  std::string name() const override { return "compressed"; }
  Partition partition() const override { return {{{"beta", "sigma2"}, {"Phi", "kappa"}}}; }
  void validate_shard(const Shard& shard, const SamplerState& state) const override;
  void initialize(SamplerState& state, const Shard& first) override;
  void update_scss(std::size_t group, const Shard& shard, SamplerState& state) override;
  void sample(std::size_t group, const Shard& shard, SamplerState& state,
              const EngineConfig& config, DrawBatch& batch) override;
  bool closed_form_estimates(std::size_t group, SamplerState& state,
                             const DrawBatch& batch) override;

  Eigen::Index m() const { return phi0_.rows(); }
  Eigen::Index p() const { return phi0_.cols(); }
  // Number of m x m W factorizations so far (one per shard).
  static std::size_t w_factorizations(const SamplerState& state);

 private:
  Matrix phi0_;
  CompressedPrior prior_;
};

// Exact Gibbs sampler on Fyy, FXy, FXX; gamma and FXX gamma are maintained
// incrementally through the column sweep.
class CompressedExact final : public ModelHooks {
 public:
  CompressedExact(Matrix phi0, CompressedPrior prior = {})
      : phi0_(std::move(phi0)), prior_(prior) {}

  std::string name() const override { return "compressed_smcmc"; }
  Partition partition() const override { return {{{"beta", "sigma2", "Phi", "kappa"}}}; }
  void validate_shard(const Shard& shard, const SamplerState& state) const override;
  void initialize(SamplerState& state, const Shard& first) override;
  void update_scss(std::size_t group, const Shard& shard, SamplerState& state) override;
  void sample(std::size_t group, const Shard& shard, SamplerState& state,
              const EngineConfig& config, DrawBatch& batch) override;
  bool closed_form_estimates(std::size_t group, SamplerState& state,
                             const DrawBatch& batch) override;

 private:
  Matrix phi0_;
  CompressedPrior prior_;
};

}  // namespace cdf
