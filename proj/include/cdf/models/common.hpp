#pragma once

#include <string>

#include "cdf/engine.hpp"
#include "cdf/linalg.hpp"

namespace cdf {

struct GaussianConditional {
  Vector mean;
  Matrix cov;
};

struct NormalConditional {
  double mean = 0.0;
  double var = 1.0;
};

// IG(shape, rate) with density proportional to x^{-shape-1} exp(-rate / x).
struct InvGammaConditional {
  double shape = 1.0;
  double rate = 1.0;

  double mean() const { return shape > 1.0 ? rate / (shape - 1.0) : rate / shape; }
};

// Throws ShardShapeError unless X is n x p and y has n entries.
void require_regression_shard(const Shard& shard, Eigen::Index p, const std::string& model);

// Throws DegeneracyError when the rate is not strictly positive or not finite.
InvGammaConditional checked_invgamma(double shape, double rate, const std::string& what);

// Fills rows of draws[id] for the recorded sweeps.
inline void record(DrawBatch& batch, const ParamId& id, long s, const Vector& v) {
  if (s >= 0) batch.draws[id].row(s) = v.transpose();
}
inline void record(DrawBatch& batch, const ParamId& id, long s, double v) {
  if (s >= 0) batch.draws[id](s, 0) = v;
}

inline Eigen::Index draw_rows(const EngineConfig& c) { return static_cast<Eigen::Index>(c.draws); }

}  // namespace cdf
