#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace cdf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A symmetric positive-definite matrix together with its lower Cholesky
// factor. Construction validates symmetry (1e-10 relative) and factorizes;
// failure throws FactorizationError carrying the first bad pivot.
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix a);

  std::size_t dim() const { return static_cast<std::size_t>(a_.rows()); }
  const Matrix& matrix() const { return a_; }
  Matrix lower() const { return llt_.matrixL(); }

  Vector solve(const Vector& b) const { return llt_.solve(b); }
  Matrix solve(const Matrix& b) const { return llt_.solve(b); }
  Matrix inverse() const;
  double log_det() const;

  // L * z
  Vector lower_times(const Vector& z) const;
  // L^{-T} * z, used when sampling from a precision parameterisation.
  Vector lower_transpose_solve(const Vector& z) const;

 private:
  Matrix a_;
  Eigen::LLT<Matrix> llt_;
};

// Solves A x = b for SPD A.
Vector chol_solve(const SpdMatrix& a, const Vector& b);
Vector chol_solve(const Matrix& a, const Vector& b);

// Symmetrises in place: A <- (A + A') / 2.
void symmetrize(Matrix& a);

}  // namespace cdf
