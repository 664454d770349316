#pragma once

#include <optional>

#include "cdf/models/common.hpp"

namespace cdf {

// sigma2 ~ IG(a0, b0), tau2 ~ IG(c0, d0), phi ~ U(-1, 1), theta_0 ~ N(0, h0).
struct DlmPrior {
  double a0 = 1.0;
  double b0 = 1.0;
  double c0 = 1.0;
  double d0 = 1.0;
  double h0 = 10.0;
};

struct DlmConfig {
  std::size_t window = 100;
  // Metropolis steps for phi per shard; spread evenly over the Gibbs sweeps.
  std::size_t mh_steps = 500;
  double mh_step_size = 0.1;
};

// Log density (up to a constant) of the phi conditional
// N(num/den, tau2/den) restricted to |phi| < 1; -inf outside.
double dlm_phi_log_target(double phi, double num, double den, double tau2);

// theta_s | theta_{s-1} = prev, theta_{s+1} = next (absent for the newest latent), y_s.
NormalConditional dlm_latent_conditional(double prev, std::optional<double> next, double y,
                                         double phi, double tau2, double sigma2);

// Moving-window sampler for y_t ~ N(theta_t, sigma2), theta_t ~ N(phi theta_{t-1}, tau2).
//
// While t <= window the sampler is exact Gibbs over theta_0..theta_t. Afterwards
// it samples theta_{t-b+1..t} with theta_{t-b} frozen. At the start of each
// step the member that became the boundary is folded into
//   C1 = 1/2 sum (y_s - th_s)^2,  C2 = 1/2 sum th_{s-1}^2,
//   C3 = 1/2 sum th_s th_{s-1},   C4 = 1/2 sum th_s^2
// over frozen indices, so C4 - 2 phi C3 + phi^2 C2 = 1/2 sum (th_s - phi th_{s-1})^2.
//
// Draws: "theta" is S x (window length) for indices aux["theta_first"]..t;
// "tau2", "sigma2", "phi" are S x 1 with phi taken at the end of each sweep.
class Dlm final : public ModelHooks {
 public:
  explicit Dlm(DlmConfig config = {}, DlmPrior prior = {}) : cfg_(config), prior_(prior) {}

  std::string name() const override { return "dlm"; }
  Partition partition() const override { return {{{"theta", "tau2", "sigma2", "phi"}}}; }
  void validate_shard(const Shard& shard, const SamplerState& state) const override;
  void initialize(SamplerState& state, const Shard& first) override;
  void update_scss(std::size_t group, const Shard& shard, SamplerState& state) override;
  void sample(std::size_t group, const Shard& shard, SamplerState& state,
              const EngineConfig& config, DrawBatch& batch) override;

  const DlmConfig& config() const { return cfg_; }
  // Index of the first latent in the current window.
  static std::size_t window_first(const SamplerState& state);
  // Metropolis acceptance rate for phi so far.
  static double acceptance_rate(const SamplerState& state);
  // Whether the window member at `index` retires after the step just taken.
  bool retires_after(const SamplerState& state, std::size_t index) const {
    return state.t >= cfg_.window && index + cfg_.window <= state.t + 1;
  }

 private:
  DlmConfig cfg_;
  DlmPrior prior_;
};

}  // namespace cdf
