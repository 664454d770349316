#include "cdf/kernels.hpp"

#include <cmath>
#include <numbers>

#include "cdf/error.hpp"

#ifdef CDF_HAVE_OPENMP
#include <omp.h>
#endif

namespace cdf::kernels {

namespace {

void check_gram(const Matrix& acc, const Matrix& x) {
  if (acc.rows() != x.cols() || acc.cols() != x.cols()) {
    throw ArgumentError("gram_accumulate: accumulator must be p x p for an n x p block");
  }
}

void check_cross(const Vector& acc, const Matrix& x, const Vector& y) {
  if (acc.size() != x.cols() || y.size() != x.rows()) {
    throw ArgumentError("crossprod_accumulate: dimension mismatch");
  }
}

inline void gram_column(Matrix& acc, const Matrix& x, double scale, Eigen::Index j) {
  for (Eigen::Index i = 0; i <= j; ++i) {
    const double v = scale * x.col(i).dot(x.col(j));
    acc(i, j) += v;
    if (i != j) acc(j, i) += v;
  }
}

inline double kde_point(std::span<const double> samples, double h, double g) {
  double s = 0.0;
  for (double xi : samples) {
    const double u = (g - xi) / h;
    s += std::exp(-0.5 * u * u);
  }
  return s / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
}

void check_kde(std::span<const double> samples, double h, std::span<const double> grid,
               std::span<double> out) {
  if (samples.empty()) throw ArgumentError("kde_on_grid: no samples");
  if (!(h > 0.0)) throw ArgumentError("kde_on_grid: bandwidth must be positive");
  if (grid.size() != out.size()) throw ArgumentError("kde_on_grid: output size mismatch");
}

constexpr long kParallelWork = 1L << 16;

}  // namespace

namespace serial {

void gram_accumulate(Matrix& acc, const Matrix& x, double scale) {
  check_gram(acc, x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) gram_column(acc, x, scale, j);
}

void crossprod_accumulate(Vector& acc, const Matrix& x, const Vector& y, double scale) {
  check_cross(acc, x, y);
  for (Eigen::Index j = 0; j < x.cols(); ++j) acc(j) += scale * x.col(j).dot(y);
}

void kde_on_grid(std::span<const double> samples, double h, std::span<const double> grid,
                 std::span<double> out) {
  check_kde(samples, h, grid, out);
  for (std::size_t g = 0; g < grid.size(); ++g) out[g] = kde_point(samples, h, grid[g]);
}

}  // namespace serial

namespace parallel {

void gram_accumulate(Matrix& acc, const Matrix& x, double scale) {
  check_gram(acc, x);
  const Eigen::Index p = x.cols();
  // Column j touches acc(0..j, j) and acc(j, 0..j-1); entries are disjoint across j.
#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index j = 0; j < p; ++j) gram_column(acc, x, scale, j);
}

void crossprod_accumulate(Vector& acc, const Matrix& x, const Vector& y, double scale) {
  check_cross(acc, x, y);
  const Eigen::Index p = x.cols();
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < p; ++j) acc(j) += scale * x.col(j).dot(y);
}

void kde_on_grid(std::span<const double> samples, double h, std::span<const double> grid,
                 std::span<double> out) {
  check_kde(samples, h, grid, out);
  const long n = static_cast<long>(grid.size());
#pragma omp parallel for schedule(static)
  for (long g = 0; g < n; ++g) out[g] = kde_point(samples, h, grid[g]);
}

}  // namespace parallel

bool openmp_enabled() {
#ifdef CDF_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef CDF_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef CDF_HAVE_OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

void gram_accumulate(Matrix& acc, const Matrix& x, double scale) {
  const long work = static_cast<long>(x.rows()) * x.cols() * x.cols() / 2;
  if (openmp_enabled() && max_threads() > 1 && work >= kParallelWork) {
    parallel::gram_accumulate(acc, x, scale);
  } else {
    serial::gram_accumulate(acc, x, scale);
  }
}

void crossprod_accumulate(Vector& acc, const Matrix& x, const Vector& y, double scale) {
  const long work = static_cast<long>(x.rows()) * x.cols();
  if (openmp_enabled() && max_threads() > 1 && work >= kParallelWork) {
    parallel::crossprod_accumulate(acc, x, y, scale);
  } else {
    serial::crossprod_accumulate(acc, x, y, scale);
  }
}

void kde_on_grid(std::span<const double> samples, double h, std::span<const double> grid,
                 std::span<double> out) {
  const long work = static_cast<long>(samples.size()) * static_cast<long>(grid.size());
  if (openmp_enabled() && max_threads() > 1 && work >= kParallelWork) {
    parallel::kde_on_grid(samples, h, grid, out);
  } else {
    serial::kde_on_grid(samples, h, grid, out);
  }
}

}  // namespace cdf::kernels
