#include "cdf/models/anova.hpp"

#include <cmath>

#include "cdf/distributions.hpp"
#include "cdf/error.hpp"

namespace cdf {

namespace {

void shard_group_sums(const Shard& shard, int k, Vector& sums, Vector& sq, Vector& counts) {
  sums = Vector::Zero(k);
  sq = Vector::Zero(k);
  counts = Vector::Zero(k);
  for (Eigen::Index i = 0; i < shard.n(); ++i) {
    const int g = shard.group[static_cast<std::size_t>(i)];
    sums(g) += shard.y(i);
    sq(g) += shard.y(i) * shard.y(i);
    counts(g) += 1.0;
  }
}

void declare_group_stats(SamplerState& state, int k) {
  state.declare_vector("Si", k);
  state.declare_vector("Si2", k);
  state.declare_vector("n", k);
}

void update_group_stats(SamplerState& state, const Vector& sums, const Vector& sq,
                        const Vector& counts) {
  state.update_stat("Si", [&](Matrix& c) { c.col(0) += sums; });
  state.update_stat("Si2", [&](Matrix& c) { c.col(0) += sq; });
  state.update_stat("n", [&](Matrix& c) { c.col(0) += counts; });
}

struct FirstShardMoments {
  double mean;
  double var;
};

FirstShardMoments first_shard_moments(const Shard& s) {
  const double m = s.y.mean();
  const double var = s.n() > 1 ? (s.y.array() - m).square().sum() / static_cast<double>(s.n() - 1) : 1.0;
  return {m, var > 0.0 ? var : 1.0};
}

double sample_normal(const NormalConditional& c, RngStream& rng) {
  return c.mean + std::sqrt(c.var) * rng.normal();
}

}  // namespace

NormalConditional anova_zeta_conditional(double group_sum, double count, double sigma2, double mu,
                                         double tau2) {
  const double denom = count * tau2 + sigma2;
  return {(tau2 * group_sum + sigma2 * mu) / denom, tau2 * sigma2 / denom};
}

NormalConditional anova_cdf_zeta_conditional(double c1, double count, double sigma2,
                                             double mu_hat, double tau2_hat) {
  const double denom = count * tau2_hat + sigma2;
  return {(c1 + sigma2 * mu_hat) / denom, tau2_hat * sigma2 / denom};
}

InvGammaConditional anova_sigma2_conditional(const AnovaPrior& prior, const Vector& sums,
                                             const Vector& sq, const Vector& counts,
                                             const Vector& zeta) {
  const double resid =
      (sq.array() - 2.0 * zeta.array() * sums.array() + counts.array() * zeta.array().square()).sum();
  return checked_invgamma(prior.alpha + 0.5 * counts.sum(), prior.beta + 0.5 * resid,
                          "anova sigma2");
}

void require_anova_shard(const Shard& shard, int k, const std::string& model) {
  if (static_cast<Eigen::Index>(shard.group.size()) != shard.n()) {
    throw ShardShapeError(model + ": every observation needs a group label");
  }
  for (int g : shard.group) {
    if (g < 0 || g >= k) {
      throw ShardShapeError(model + ": group label " + std::to_string(g) + " outside [0, " +
                            std::to_string(k) + ")");
    }
  }
}

void AnovaCdf::validate_shard(const Shard& shard, const SamplerState&) const {
  require_anova_shard(shard, k_, name());
}

void AnovaCdf::initialize(SamplerState& state, const Shard& first) {
  state.declare_vector("C1", k_);
  state.declare_vector("C2", 2);
  declare_group_stats(state, k_);
  const auto m = first_shard_moments(first);
  state.estimates["zeta"] = Vector::Zero(k_);
  state.estimates["sigma2"] = Vector::Constant(1, m.var);
  state.estimates["mu"] = Vector::Constant(1, m.mean);
  state.estimates["tau2"] = Vector::Ones(1);
  state.aux["tau_hat"] = Matrix::Ones(1, 1);
  state.aux["sigma2"] = Matrix::Constant(1, 1, m.var);
  state.aux["tau2"] = Matrix::Ones(1, 1);
}

void AnovaCdf::update_scss(std::size_t group, const Shard& shard, SamplerState& state) {
  if (group == 0) {
    Vector sums, sq, counts;
    shard_group_sums(shard, k_, sums, sq, counts);
    update_group_stats(state, sums, sq, counts);
    const double tau_hat = state.aux_at("tau_hat")(0, 0);
    const Vector increment = cumulative_ ? state.vector("Si") : sums;
    state.update_stat("C1", [&](Matrix& c) { c.col(0) += tau_hat * tau_hat * increment; });
    return;
  }
  const Vector& zeta = state.estimate("zeta");
  state.update_stat("C2", [&](Matrix& c) {
    c(0, 0) = zeta.squaredNorm();
    c(1, 0) = zeta.sum();
  });
}

void AnovaCdf::sample(std::size_t group, const Shard&, SamplerState& state,
                      const EngineConfig& config, DrawBatch& batch) {
  if (group == 0) {
    const Vector c1 = state.vector("C1");
    const Vector sums = state.vector("Si");
    const Vector sq = state.vector("Si2");
    const Vector counts = state.vector("n");
    const double mu_hat = state.scalar_estimate("mu");
    const double tau_hat = state.aux_at("tau_hat")(0, 0);
    double sigma2 = state.aux_at("sigma2")(0, 0);
    Vector zeta(k_);
    batch.resize("zeta", draw_rows(config), k_);
    batch.resize("sigma2", draw_rows(config), 1);
    for_each_sweep(config, [&](long s) {
      for (int i = 0; i < k_; ++i) {
        zeta(i) = sample_normal(
            anova_cdf_zeta_conditional(c1(i), counts(i), sigma2, mu_hat, tau_hat * tau_hat), state.rng);
      }
      const auto ig = anova_sigma2_conditional(prior_, sums, sq, counts, zeta);
      sigma2 = sample_invgamma(ig.shape, ig.rate, state.rng);
      record(batch, "zeta", s, zeta);
      record(batch, "sigma2", s, sigma2);
    });
    state.aux_at("sigma2")(0, 0) = sigma2;
    return;
  }
  const double c21 = state.vector("C2")(0);
  const double c22 = state.vector("C2")(1);
  const double k = static_cast<double>(k_);
  double tau2 = state.aux_at("tau2")(0, 0);
  double mu = 0.0;
  batch.resize("mu", draw_rows(config), 1);
  batch.resize("tau2", draw_rows(config), 1);
  for_each_sweep(config, [&](long s) {
    mu = c22 / k + std::sqrt(tau2 / k) * state.rng.normal();
    const auto ig = checked_invgamma(prior_.a + 0.5 * k,
                                     prior_.b + 0.5 * (c21 - 2.0 * mu * c22 + k * mu * mu),
                                     "anova tau2");
    tau2 = sample_invgamma(ig.shape, ig.rate, state.rng);
    record(batch, "mu", s, mu);
    record(batch, "tau2", s, tau2);
  });
  state.aux_at("tau2")(0, 0) = tau2;
}

bool AnovaCdf::closed_form_estimates(std::size_t group, SamplerState& state,
                                     const DrawBatch& batch) {
  if (group == 1) {
    // tau_hat is the mean of the tau draws; the tau2 estimate stays the mean of tau2 draws.
    state.aux_at("tau_hat")(0, 0) = batch.at("tau2").array().sqrt().mean();
  }
  return false;
}

void AnovaExact::validate_shard(const Shard& shard, const SamplerState&) const {
  require_anova_shard(shard, k_, name());
}

void AnovaExact::initialize(SamplerState& state, const Shard& first) {
  declare_group_stats(state, k_);
  const auto m = first_shard_moments(first);
  state.aux["zeta"] = Matrix::Zero(k_, 1);
  state.aux["sigma2"] = Matrix::Constant(1, 1, m.var);
  state.aux["mu"] = Matrix::Constant(1, 1, fixed_tau2_ > 0.0 ? fixed_mu_ : m.mean);
  state.aux["tau2"] = Matrix::Constant(1, 1, fixed_tau2_ > 0.0 ? fixed_tau2_ : 1.0);
  state.estimates["zeta"] = Vector::Zero(k_);
  state.estimates["sigma2"] = Vector::Constant(1, m.var);
  state.estimates["mu"] = Vector::Constant(1, m.mean);
  state.estimates["tau2"] = Vector::Ones(1);
}

void AnovaExact::update_scss(std::size_t, const Shard& shard, SamplerState& state) {
  Vector sums, sq, counts;
  shard_group_sums(shard, k_, sums, sq, counts);
  update_group_stats(state, sums, sq, counts);
}

void AnovaExact::sample(std::size_t, const Shard&, SamplerState& state,
                        const EngineConfig& config, DrawBatch& batch) {
  const Vector sums = state.vector("Si");
  const Vector sq = state.vector("Si2");
  const Vector counts = state.vector("n");
  const double k = static_cast<double>(k_);
  Vector zeta = state.aux_at("zeta").col(0);
  double sigma2 = state.aux_at("sigma2")(0, 0);
  double mu = state.aux_at("mu")(0, 0);
  double tau2 = state.aux_at("tau2")(0, 0);
  for (const char* id : {"sigma2", "mu", "tau2"}) batch.resize(id, draw_rows(config), 1);
  batch.resize("zeta", draw_rows(config), k_);
  for_each_sweep(config, [&](long s) {
    for (int i = 0; i < k_; ++i) {
      zeta(i) = sample_normal(anova_zeta_conditional(sums(i), counts(i), sigma2, mu, tau2), state.rng);
    }
    const auto ig = anova_sigma2_conditional(prior_, sums, sq, counts, zeta);
    sigma2 = sample_invgamma(ig.shape, ig.rate, state.rng);
    if (fixed_tau2_ <= 0.0) {
      mu = zeta.mean() + std::sqrt(tau2 / k) * state.rng.normal();
      const auto igt = checked_invgamma(prior_.a + 0.5 * k,
                                        prior_.b + 0.5 * (zeta.array() - mu).square().sum(),
                                        "anova tau2");
      tau2 = sample_invgamma(igt.shape, igt.rate, state.rng);
    }
    record(batch, "zeta", s, zeta);
    record(batch, "sigma2", s, sigma2);
    record(batch, "mu", s, mu);
    record(batch, "tau2", s, tau2);
  });
  state.aux_at("zeta").col(0) = zeta;
  state.aux_at("sigma2")(0, 0) = sigma2;
  state.aux_at("mu")(0, 0) = mu;
  state.aux_at("tau2")(0, 0) = tau2;
}

}  // namespace cdf
