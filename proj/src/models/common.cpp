#include "cdf/models/common.hpp"

#include <cmath>

#include "cdf/error.hpp"

namespace cdf {

void require_regression_shard(const Shard& shard, Eigen::Index p, const std::string& model) {
  if (shard.X.cols() != p) {
    throw ShardShapeError(model + ": shard has " + std::to_string(shard.X.cols()) +
                          " predictors, expected " + std::to_string(p));
  }
  if (shard.X.rows() != shard.y.size()) {
    throw ShardShapeError(model + ": X has " + std::to_string(shard.X.rows()) + " rows but y has " +
                          std::to_string(shard.y.size()) + " entries");
  }
}

InvGammaConditional checked_invgamma(double shape, double rate, const std::string& what) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw DegeneracyError(what + ": inverse-gamma rate " + std::to_string(rate) +
                          " is not positive");
  }
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw DegeneracyError(what + ": inverse-gamma shape " + std::to_string(shape) +
                          " is not positive");
  }
  return {shape, rate};
}

}  // namespace cdf
