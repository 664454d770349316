#pragma once

#include "cdf/models/common.hpp"

namespace cdf {

struct LinRegPrior {
  double a = 1.0;
  double b = 1.0;
};

// beta | sigma2 ~ N(Sigma C12, Sigma) with Sigma = (C11 + I)^{-1}; C11 and C12
// already carry the 1/sigma2 scaling.
GaussianConditional linreg_beta_conditional(const Matrix& c11, const Vector& c12);

// IG(a + nt/2, b + (syy - 2 c22 + c21)/2); degenerate rates throw DegeneracyError.
InvGammaConditional linreg_sigma2_conditional(const LinRegPrior& prior, double nt, double syy,
                                              double c22, double c21);

// Approximate sampler. Groups: {beta}, {sigma2}.
// Statistics: C11 (p x p), C12 (p), C21, C22, SYY, nt.
class LinRegCdf final : public ModelHooks {
 public:
  explicit LinRegCdf(Eigen::Index p, LinRegPrior prior = {}) : p_(p), prior_(prior) {}

  std::string name() const override { return "linreg"; }
  Partition partition() const override { return {{{"beta"}, {"sigma2"}}}; }
  void validate_shard(const Shard& shard, const SamplerState& state) const override;
  void initialize(SamplerState& state, const Shard& first) override;
  void update_scss(std::size_t group, const Shard& shard, SamplerState& state) override;
  void sample(std::size_t group, const Shard& shard, SamplerState& state,
              const EngineConfig& config, DrawBatch& batch) override;

  // When set, the sigma2 group is skipped and its estimate stays at this value.
  void freeze_sigma2(double value) { frozen_sigma2_ = value; }
  // Start sigma2 at the first shard's sample variance instead of 1.
  void start_from_first_shard(bool on) { first_shard_start_ = on; }

 private:
  Eigen::Index p_;
  LinRegPrior prior_;
  double frozen_sigma2_ = 0.0;
  bool first_shard_start_ = false;
};

// Exact two-block Gibbs sampler driven by SXX, SXY, SYY over all data seen.
// The chain continues across shards from its last position.
class LinRegExact final : public ModelHooks {
 public:
  explicit LinRegExact(Eigen::Index p, LinRegPrior prior = {}) : p_(p), prior_(prior) {}

  std::string name() const override { return "linreg_smcmc"; }
  Partition partition() const override { return {{{"beta", "sigma2"}}}; }
  void validate_shard(const Shard& shard, const SamplerState& state) const override;
  void initialize(SamplerState& state, const Shard& first) override;
  void update_scss(std::size_t group, const Shard& shard, SamplerState& state) override;
  void sample(std::size_t group, const Shard& shard, SamplerState& state,
              const EngineConfig& config, DrawBatch& batch) override;

  // Holds sigma2 fixed at this value inside the Gibbs sweep (used by oracle tests).
  void fix_sigma2(double value) { fixed_sigma2_ = value; }

 private:
  Eigen::Index p_;
  LinRegPrior prior_;
  double fixed_sigma2_ = 0.0;
};

}  // namespace cdf
