#include "cdf/linalg.hpp"

#include <cmath>
#include <string>

#include "cdf/error.hpp"

namespace cdf {

namespace {

// Unblocked Cholesky used only to name the pivot that broke Eigen's LLT.
std::size_t first_bad_pivot(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return static_cast<std::size_t>(j);
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return static_cast<std::size_t>(n);
}

}  // namespace

SpdMatrix::SpdMatrix(Matrix a) : a_(std::move(a)) {
  if (a_.rows() != a_.cols() || a_.rows() == 0) {
    throw ArgumentError("SpdMatrix: expected a non-empty square matrix, got " +
                        std::to_string(a_.rows()) + "x" + std::to_string(a_.cols()));
  }
  if (!a_.allFinite()) {
    throw FactorizationError(0, "SpdMatrix: non-finite entries");
  }
  const double scale = a_.cwiseAbs().maxCoeff();
  const double asym = (a_ - a_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(scale, 1e-300)) {
    throw ArgumentError("SpdMatrix: matrix is not symmetric (max |A - A'| = " +
                        std::to_string(asym) + ")");
  }
  llt_.compute(a_);
  if (llt_.info() != Eigen::Success) {
    const std::size_t pivot = first_bad_pivot(a_);
    throw FactorizationError(pivot, "Cholesky factorization failed: non-positive pivot at index " +
                                        std::to_string(pivot));
  }
}

Matrix SpdMatrix::inverse() const {
  return llt_.solve(Matrix::Identity(a_.rows(), a_.cols()));
}

double SpdMatrix::log_det() const {
  const auto& l = llt_.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Vector SpdMatrix::lower_times(const Vector& z) const {
  return llt_.matrixL() * z;
}

Vector SpdMatrix::lower_transpose_solve(const Vector& z) const {
  return llt_.matrixU().solve(z);
}

Vector chol_solve(const SpdMatrix& a, const Vector& b) {
  if (static_cast<std::size_t>(b.size()) != a.dim()) {
    throw ArgumentError("chol_solve: dimension mismatch");
  }
  return a.solve(b);
}

Vector chol_solve(const Matrix& a, const Vector& b) { return chol_solve(SpdMatrix(a), b); }

void symmetrize(Matrix& a) {
  a = 0.5 * (a + a.transpose()).eval();
}

}  // namespace cdf
