#pragma once

#include "cdf/models/common.hpp"

namespace cdf {

// Budget ceil(p log p) used when none is configured.
std::size_t probit_default_budget(Eigen::Index p);

// Expected latent score x'beta + y phi(x'beta) / Phi(y x'beta) for y in {-1, +1}.
double probit_frozen_score(double linear_predictor, double y);

// Mean over draws (rows of beta_draws) of Phi(x'beta) for every row of x.
Vector probit_predict(const Matrix& beta_draws, const Matrix& x);

// Requires y in {-1, +1}.
void require_probit_shard(const Shard& shard, Eigen::Index p, const std::string& model);

// Budgeted sampler, prior beta ~ N(0, I).
// Statistics: SXX (p x p) and C (p, accumulated X'z_hat of retired rows).
// aux: SigmaXX cached from SXX, the window rows Xw and labels yw (at most
// `budget` rows, oldest first) and the beta chain position.
// Before a shard is appended, the oldest rows are retired so that the window
// stays within budget; their scores are frozen at the current beta estimate.
class ProbitCdf final : public ModelHooks {
 public:
  ProbitCdf(Eigen::Index p, std::size_t budget) : p_(p), budget_(budget) {}

  std::string name() const override { return "probit"; }
  Partition partition() const override { return {{{"beta"}}}; }
  void validate_shard(const Shard& shard, const SamplerState& state) const override;
  void initialize(SamplerState& state, const Shard& first) override;
  void update_scss(std::size_t group, const Shard& shard, SamplerState& state) override;
  void sample(std::size_t group, const Shard& shard, SamplerState& state,
              const EngineConfig& config, DrawBatch& batch) override;

  std::size_t budget() const { return budget_; }
  // Number of SigmaXX recomputations so far.
  static std::size_t sigma_updates(const SamplerState& state);

 private:
  Eigen::Index p_;
  std::size_t budget_;
};

// Exact Albert-Chib Gibbs over every latent score seen so far.
class ProbitExact final : public ModelHooks {
 public:
  explicit ProbitExact(Eigen::Index p) : p_(p) {}

  std::string name() const override { return "probit_smcmc"; }
  Partition partition() const override { return {{{"beta"}}}; }
  void validate_shard(const Shard& shard, const SamplerState& state) const override;
  void initialize(SamplerState& state, const Shard& first) override;
  void update_scss(std::size_t group, const Shard& shard, SamplerState& state) override;
  void sample(std::size_t group, const Shard& shard, SamplerState& state,
              const EngineConfig& config, DrawBatch& batch) override;

 private:
  Eigen::Index p_;
};

}  // namespace cdf
