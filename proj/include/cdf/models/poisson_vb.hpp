#pragma once

#include <vector>

#include "cdf/models/common.hpp"

namespace cdf {

// y ~ Poisson(exp(X beta + Z u)), beta ~ N(0, sigma_beta2 I_k),
// u_s ~ N(0, sigma_s^2 I_{k_s}), sigma_s^2 ~ IG(1/2, 1/b_s), b_s ~ IG(1/2, 1/a_s^2).
struct PoissonVbConfig {
  Eigen::Index fixed_effects = 1;
  std::vector<Eigen::Index> random_sizes{1};  // k_1..k_r, columns of Z in order
  double sigma_beta2 = 10.0;
  std::vector<double> a{1.0};  // a_1..a_r
  std::size_t max_iterations = 25;
  double tolerance = 1e-8;
  double exponent_limit = 30.0;
  int max_halvings = 10;
  // Newton step anchored at the previous shard's mean instead of the current iterate.
  bool anchor_previous_shard = false;
};

// One round of the hyperparameter sub-loop for component s:
// mu_inv_b = 1 / (mu_inv_sigma2 + a^-2), then
// mu_inv_sigma2 = (k_s + 1) / (2 mu_inv_b + |mu_u|^2 + tr Sigma_u).
struct HyperUpdate {
  double mu_inv_b;
  double mu_inv_sigma2;
};
HyperUpdate poisson_vb_hyper_step(double mu_inv_sigma2, double a, double k_s, double u_sq_plus_trace);

// Streaming variational approximation q(beta, u) q(sigma^2) q(b) maintained through the
// surrogate statistics C11 = sum c'y, C12 = sum c'w, C13 = sum c' diag(w) c with
// c = [X, Z] and w = exp(c mu + c Sigma c' / 2) frozen at the end of each shard.
// Groups: {mu, Sigma}, {mu_inv_b, mu_inv_sigma2}. Fixed-point iteration stands in
// for sampling; each batch holds a single row with the current variational values.
class PoissonVb final : public ModelHooks {
 public:
  explicit PoissonVb(PoissonVbConfig config);

  std::string name() const override { return "poisson_vb"; }
  Partition partition() const override {
    return {{{"mu", "Sigma"}, {"mu_inv_b", "mu_inv_sigma2"}}};
  }
  void validate_shard(const Shard& shard, const SamplerState& state) const override;
  void initialize(SamplerState& state, const Shard& first) override;
  void update_scss(std::size_t group, const Shard& shard, SamplerState& state) override;
  void sample(std::size_t group, const Shard& shard, SamplerState& state,
              const EngineConfig& config, DrawBatch& batch) override;
  bool closed_form_estimates(std::size_t group, SamplerState& state,
                             const DrawBatch& batch) override;

  Eigen::Index dim() const { return dim_; }
  // Fixed-point iterations used by the last mean/covariance loop.
  static std::size_t last_iterations(const SamplerState& state);

 private:
  Matrix penalty(const SamplerState& state) const;
  static Matrix design(const Shard& shard);

  PoissonVbConfig cfg_;
  Eigen::Index dim_;
};

}  // namespace cdf
