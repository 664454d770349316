#include "cdf/distributions.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>
#include <string>

#include "cdf/error.hpp"

namespace cdf {

namespace {
constexpr double kTailSwitch = 5.0;

// z ~ N(0,1) conditioned on z > a, a > 0 (Robert 1995, optimal exponential rate).
double tail_normal_above(double a, RngStream& rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(rng.uniform()) / lambda;
    const double d = z - lambda;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
  }
}
}  // namespace

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("std_normal_quantile: p must lie in (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double inverse_mills(double a) {
  if (a > -30.0) return std_normal_pdf(a) / std_normal_cdf(a);
  // Asymptotic expansion of phi(a)/Phi(a) for a -> -inf.
  const double a2 = a * a;
  return -a / (1.0 - 1.0 / a2 + 3.0 / (a2 * a2) - 15.0 / (a2 * a2 * a2));
}

double truncnormal_mean(double mean, int sign) {
  if (sign >= 0) return mean + inverse_mills(mean);
  return mean - inverse_mills(-mean);
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate)) {
    throw ArgumentError("sample_gamma: shape and rate must be positive and finite (shape=" +
                        std::to_string(shape) + ", rate=" + std::to_string(rate) + ")");
  }
  if (shape < 1.0) {
    const double g = sample_gamma(shape + 1.0, 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape) / rate;
  }
  // Marsaglia & Tsang (2000).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double sample_invgamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw ArgumentError("sample_invgamma: shape and rate must be positive (shape=" +
                        std::to_string(shape) + ", rate=" + std::to_string(rate) + ")");
  }
  return rate / sample_gamma(shape, 1.0, rng);
}

double sample_truncnormal(double mean, int sign, RngStream& rng) {
  if (sign != 1 && sign != -1) throw ArgumentError("sample_truncnormal: sign must be +1 or -1");
  if (sign == -1) return -sample_truncnormal(-mean, 1, rng);
  // z = mean + y, y ~ N(0,1) with y > -mean.
  if (mean < -kTailSwitch) return mean + tail_normal_above(-mean, rng);
  if (mean > kTailSwitch) {
    for (;;) {
      const double z = mean + rng.normal();
      if (z > 0.0) return z;
    }
  }
  // -y ~ N(0,1) truncated to (-inf, mean): invert the CDF on (0, Phi(mean)).
  const double p = rng.uniform() * std_normal_cdf(mean);
  return mean - std_normal_quantile(p);
}

Vector standard_normal_vector(Eigen::Index n, RngStream& rng) {
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
  return z;
}

Vector sample_mvn(const Vector& mean, const SpdMatrix& cov, RngStream& rng) {
  if (static_cast<std::size_t>(mean.size()) != cov.dim()) {
    throw ArgumentError("sample_mvn: mean and covariance dimensions differ");
  }
  return mean + cov.lower_times(standard_normal_vector(mean.size(), rng));
}

Vector sample_mvn_precision(const SpdMatrix& precision, const Vector& h, RngStream& rng) {
  if (static_cast<std::size_t>(h.size()) != precision.dim()) {
    throw ArgumentError("sample_mvn_precision: dimension mismatch");
  }
  return precision.solve(h) +
         precision.lower_transpose_solve(standard_normal_vector(h.size(), rng));
}

}  // namespace cdf
