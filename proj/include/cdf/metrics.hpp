#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cdf/linalg.hpp"
#include "cdf/rng.hpp"

namespace cdf {

// One observation of an evaluation quantity; `flag` is empty unless the value
// should be read with care (e.g. "few_draws").
struct MetricRow {
  int rep = 0;
  std::size_t t = 0;
  std::string algorithm;
  std::string metric;
  std::string parameter;
  double value = 0.0;
  double stderr_ = std::numeric_limits<double>::quiet_NaN();
  std::string flag;
};

// Mean of squared differences. Throws ArgumentError on empty or mismatched input.
double mse(std::span<const double> estimates, std::span<const double> truth);
double mse(const Vector& estimates, const Vector& truth);
double mspe(const Vector& predictions, const Vector& y_test);

// Type-7 (linear interpolation) sample quantile; q in [0, 1].
double quantile(std::vector<double> values, double q);

struct CredibleInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;

  bool contains(double v) const { return lo <= v && v <= hi; }
  double length() const { return hi - lo; }
};

// Equal-tailed interval from empirical percentiles.
CredibleInterval credible_interval(std::span<const double> draws, double level = 0.95);

inline constexpr std::size_t kMinIntervalDraws = 40;

struct CoverageResult {
  double coverage = 0.0;
  double mean_length = 0.0;
  bool few_draws = false;  // fewer than kMinIntervalDraws draws per interval
};

// Columns of `draws` (S x d) are the per-parameter draw sequences.
CoverageResult interval_coverage(const Matrix& draws, const Vector& truth, double level = 0.95);

// Predictive intervals: draw s of test point i is mean_draws(s, i) + sqrt(sigma2(s)) * z.
CoverageResult predictive_coverage(const Matrix& mean_draws, const Vector& sigma2_draws,
                                   const Vector& y_test, RngStream& rng, double level = 0.95);

// 0.9 min(sd, IQR / 1.34) n^{-1/5}, falling back to sd when the IQR vanishes.
// Returns 0 for a constant sample.
double silverman_bandwidth(std::span<const double> x);

inline constexpr std::size_t kAccuracyGrid = 512;

// 1 - TV between Gaussian kernel density estimates of the two samples, integrated by the
// trapezoid rule on a common grid spanning the pooled range +/- 3 pooled bandwidths.
// A constant sample is smoothed with the other sample's bandwidth; two constant samples
// give 1 when equal and 0 otherwise.
double accuracy_tv(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kNeverReached = std::numeric_limits<std::size_t>::max();

struct MspeCheckpoint {
  std::size_t cumulative_draws = 0;
  double mspe = 0.0;
};

// Cumulative draws at the first checkpoint with MSPE <= threshold, kNeverReached otherwise.
std::size_t ess_until(std::span<const MspeCheckpoint> checkpoints, double threshold);

struct MeanWithSe {
  double mean = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();  // NaN with fewer than two values
};

inline constexpr std::size_t kBootstrapResamples = 200;

MeanWithSe bootstrap_mean(std::span<const double> values, RngStream& rng,
                          std::size_t resamples = kBootstrapResamples);

// Least-squares slope of values against times.
double trend_slope(std::span<const double> times, std::span<const double> values);

}  // namespace cdf
