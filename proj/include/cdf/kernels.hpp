#pragma once

#include <span>

#include "cdf/linalg.hpp"

// Data-parallel building blocks. Every kernel exists in a serial reference
// form and an OpenMP form; both compute each output entry with the same
// sequence of floating-point operations, so their results are bit-identical
// and thread-count independent.
namespace cdf::kernels {

namespace serial {
// acc += scale * X'X
void gram_accumulate(Matrix& acc, const Matrix& x, double scale = 1.0);
// acc += scale * X'y
void crossprod_accumulate(Vector& acc, const Matrix& x, const Vector& y, double scale = 1.0);
// Gaussian kernel density of `samples` with bandwidth h evaluated at each grid point.
void kde_on_grid(std::span<const double> samples, double h, std::span<const double> grid,
                 std::span<double> out);
}  // namespace serial

namespace parallel {
void gram_accumulate(Matrix& acc, const Matrix& x, double scale = 1.0);
void crossprod_accumulate(Vector& acc, const Matrix& x, const Vector& y, double scale = 1.0);
void kde_on_grid(std::span<const double> samples, double h, std::span<const double> grid,
                 std::span<double> out);
}  // namespace parallel

// Dispatchers: parallel form when OpenMP is enabled and the problem is big
// enough to amortise the fork, serial otherwise.
void gram_accumulate(Matrix& acc, const Matrix& x, double scale = 1.0);
void crossprod_accumulate(Vector& acc, const Matrix& x, const Vector& y, double scale = 1.0);
void kde_on_grid(std::span<const double> samples, double h, std::span<const double> grid,
                 std::span<double> out);

bool openmp_enabled();
int max_threads();
void set_threads(int n);

}  // namespace cdf::kernels
