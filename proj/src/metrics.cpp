#include "cdf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdf/error.hpp"
#include "cdf/kernels.hpp"

namespace cdf {

namespace {

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

std::span<const double> column(const Matrix& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

}  // namespace

double mse(std::span<const double> estimates, std::span<const double> truth) {
  if (estimates.empty()) throw ArgumentError("mse: empty input");
  if (estimates.size() != truth.size()) throw ArgumentError("mse: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double d = estimates[i] - truth[i];
    s += d * d;
  }
  return s / static_cast<double>(estimates.size());
}

double mse(const Vector& estimates, const Vector& truth) {
  return mse(std::span<const double>(estimates.data(), static_cast<std::size_t>(estimates.size())),
             std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())));
}

double mspe(const Vector& predictions, const Vector& y_test) {
  if (y_test.size() == 0) throw ArgumentError("mspe: empty test set");
  return mse(predictions, y_test);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CredibleInterval credible_interval(std::span<const double> draws, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("credible_interval: level must lie in (0, 1)");
  std::vector<double> v(draws.begin(), draws.end());
  const double tail = 0.5 * (1.0 - level);
  return {quantile(v, tail), quantile(v, 1.0 - tail), level};
}

CoverageResult interval_coverage(const Matrix& draws, const Vector& truth, double level) {
  if (draws.cols() != truth.size()) throw ArgumentError("interval_coverage: dimension mismatch");
  if (draws.cols() == 0 || draws.rows() == 0) throw ArgumentError("interval_coverage: empty input");
  CoverageResult r;
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    const auto ci = credible_interval(column(draws, j), level);
    r.coverage += ci.contains(truth(j)) ? 1.0 : 0.0;
    r.mean_length += ci.length();
  }
  r.coverage /= static_cast<double>(draws.cols());
  r.mean_length /= static_cast<double>(draws.cols());
  r.few_draws = static_cast<std::size_t>(draws.rows()) < kMinIntervalDraws;
  return r;
}

CoverageResult predictive_coverage(const Matrix& mean_draws, const Vector& sigma2_draws,
                                   const Vector& y_test, RngStream& rng, double level) {
  if (mean_draws.rows() != sigma2_draws.size() || mean_draws.cols() != y_test.size()) {
    throw ArgumentError("predictive_coverage: dimension mismatch");
  }
  Matrix pred = mean_draws;
  for (Eigen::Index s = 0; s < pred.rows(); ++s) {
    const double sd = std::sqrt(sigma2_draws(s));
    for (Eigen::Index i = 0; i < pred.cols(); ++i) pred(s, i) += sd * rng.normal();
  }
  return interval_coverage(pred, y_test, level);
}

double silverman_bandwidth(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double sd = sample_sd(x);
  if (sd == 0.0) return 0.0;
  std::vector<double> v(x.begin(), x.end());
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

double accuracy_tv(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("accuracy_tv: empty sample");
  double ha = silverman_bandwidth(a);
  double hb = silverman_bandwidth(b);
  if (ha == 0.0 && hb == 0.0) return a.front() == b.front() ? 1.0 : 0.0;
  if (ha == 0.0) ha = hb;
  if (hb == 0.0) hb = ha;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  double h = silverman_bandwidth(pooled);
  if (h == 0.0) h = std::max(ha, hb);
  const auto [lo_it, hi_it] = std::minmax_element(pooled.begin(), pooled.end());
  const double lo = *lo_it - 3.0 * h;
  const double hi = *hi_it + 3.0 * h;

  std::vector<double> grid(kAccuracyGrid), fa(kAccuracyGrid), fb(kAccuracyGrid);
  const double dx = (hi - lo) / static_cast<double>(kAccuracyGrid - 1);
  for (std::size_t i = 0; i < kAccuracyGrid; ++i) grid[i] = lo + dx * static_cast<double>(i);
  kernels::kde_on_grid(a, ha, grid, fa);
  kernels::kde_on_grid(b, hb, grid, fb);

  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < kAccuracyGrid; ++i) {
    integral += 0.5 * dx * (std::abs(fa[i] - fb[i]) + std::abs(fa[i + 1] - fb[i + 1]));
  }
  return std::clamp(1.0 - 0.5 * integral, 0.0, 1.0);
}

std::size_t ess_until(std::span<const MspeCheckpoint> checkpoints, double threshold) {
  for (const auto& c : checkpoints) {
    if (c.mspe <= threshold) return c.cumulative_draws;
  }
  return kNeverReached;
}

MeanWithSe bootstrap_mean(std::span<const double> values, RngStream& rng, std::size_t resamples) {
  if (values.empty()) throw ArgumentError("bootstrap_mean: empty input");
  MeanWithSe r;
  const double n = static_cast<double>(values.size());
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2 || resamples < 2) return r;
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto k = static_cast<std::size_t>(rng.uniform() * n);
      s += values[std::min(k, values.size() - 1)];
    }
    m = s / n;
  }
  r.se = sample_sd(means);
  return r;
}

double trend_slope(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size() || times.size() < 2) {
    throw ArgumentError("trend_slope: need at least two paired points");
  }
  const double n = static_cast<double>(times.size());
  const double mt = std::accumulate(times.begin(), times.end(), 0.0) / n;
  const double mv = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    sxy += (times[i] - mt) * (values[i] - mv);
    sxx += (times[i] - mt) * (times[i] - mt);
  }
  if (sxx == 0.0) throw ArgumentError("trend_slope: times are all equal");
  return sxy / sxx;
}

}  // namespace cdf
