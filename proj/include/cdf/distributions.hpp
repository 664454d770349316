#pragma once

#include "cdf/linalg.hpp"
#include "cdf/rng.hpp"

namespace cdf {

double std_normal_pdf(double x);
double std_normal_cdf(double x);
double std_normal_quantile(double p);

// phi(a) / Phi(a), stable for very negative a.
double inverse_mills(double a);

// E[z] for z ~ N(mean, 1) restricted to the half-line of `sign` (+1: z > 0).
double truncnormal_mean(double mean, int sign);

double sample_gamma(double shape, double rate, RngStream& rng);

// Density proportional to x^{-shape-1} exp(-rate / x).
double sample_invgamma(double shape, double rate, RngStream& rng);

// N(mean, 1) truncated to (0, inf) when sign = +1 and (-inf, 0) when sign = -1.
double sample_truncnormal(double mean, int sign, RngStream& rng);

// mean + L z with cov = L L'.
Vector sample_mvn(const Vector& mean, const SpdMatrix& cov, RngStream& rng);

// N(Q^{-1} h, Q^{-1}) given the factored precision Q and linear term h.
Vector sample_mvn_precision(const SpdMatrix& precision, const Vector& h, RngStream& rng);

Vector standard_normal_vector(Eigen::Index n, RngStream& rng);

}  // namespace cdf
