#pragma once

#include "cdf/models/common.hpp"

namespace cdf {

// Priors: tau2 ~ IG(a, b), sigma2 ~ IG(alpha, beta), flat on mu.
struct AnovaPrior {
  double a = 1.0;
  double b = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
};

// Exact zeta_i | sigma2, mu, tau2 given the group sum and count.
NormalConditional anova_zeta_conditional(double group_sum, double count, double sigma2, double mu,
                                         double tau2);
// Surrogate form: the data term tau2 * S_i is replaced by the propagated C1_i.
NormalConditional anova_cdf_zeta_conditional(double c1, double count, double sigma2,
                                             double mu_hat, double tau2_hat);
// sigma2 | zeta from the exact group sums, squared norms and counts.
InvGammaConditional anova_sigma2_conditional(const AnovaPrior& prior, const Vector& sums,
                                             const Vector& sq, const Vector& counts,
                                             const Vector& zeta);

// Shards carry y with 0-based group labels in Shard::group.
void require_anova_shard(const Shard& shard, int k, const std::string& model);

// Approximate sampler. Groups: {zeta, sigma2}, {mu, tau2}.
// Statistics: C1 (k), C2 = (|zeta_hat|^2, sum zeta_hat), and the exact group
// sums Si, squared norms Si2 and counts n (needed by the sigma2 conditional).
class AnovaCdf final : public ModelHooks {
 public:
  explicit AnovaCdf(int k, AnovaPrior prior = {}, bool cumulative_c1 = false)
      : k_(k), prior_(prior), cumulative_(cumulative_c1) {}

  std::string name() const override { return "anova"; }
  Partition partition() const override { return {{{"zeta", "sigma2"}, {"mu", "tau2"}}}; }
  void validate_shard(const Shard& shard, const SamplerState& state) const override;
  void initialize(SamplerState& state, const Shard& first) override;
  void update_scss(std::size_t group, const Shard& shard, SamplerState& state) override;
  void sample(std::size_t group, const Shard& shard, SamplerState& state,
              const EngineConfig& config, DrawBatch& batch) override;
  bool closed_form_estimates(std::size_t group, SamplerState& state,
                             const DrawBatch& batch) override;

 private:
  int k_;
  AnovaPrior prior_;
  bool cumulative_;
};

// Exact Gibbs over (zeta, sigma2, mu, tau2) from group sufficient statistics.
class AnovaExact final : public ModelHooks {
 public:
  explicit AnovaExact(int k, AnovaPrior prior = {}) : k_(k), prior_(prior) {}

  std::string name() const override { return "anova_smcmc"; }
  Partition partition() const override { return {{{"zeta", "sigma2", "mu", "tau2"}}}; }
  void validate_shard(const Shard& shard, const SamplerState& state) const override;
  void initialize(SamplerState& state, const Shard& first) override;
  void update_scss(std::size_t group, const Shard& shard, SamplerState& state) override;
  void sample(std::size_t group, const Shard& shard, SamplerState& state,
              const EngineConfig& config, DrawBatch& batch) override;

  // Holds mu and tau2 fixed (oracle tests).
  void fix_hyper(double mu, double tau2) {
    fixed_mu_ = mu;
    fixed_tau2_ = tau2;
  }

 private:
  int k_;
  AnovaPrior prior_;
  double fixed_mu_ = 0.0;
  double fixed_tau2_ = 0.0;
};

}  // namespace cdf
