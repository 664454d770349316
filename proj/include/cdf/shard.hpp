#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cdf/linalg.hpp"

namespace cdf {

// One incoming data block D_t. Models use the fields they need:
// regression models read X and y, ANOVA reads y with `group` labels,
// the Poisson mixed model also reads the random-effects design Z, and the
// dynamic linear model receives a single observation in y.
struct Shard {
  std::size_t t = 0;
  Matrix X;
  Matrix Z;
  Vector y;
  std::vector<int> group;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return X.cols(); }
};

class ShardSource {
 public:
  virtual ~ShardSource() = default;
  virtual std::optional<Shard> next() = 0;
};

class VectorShardSource final : public ShardSource {
 public:
  explicit VectorShardSource(std::vector<Shard> shards) : shards_(std::move(shards)) {}
  std::optional<Shard> next() override {
    if (pos_ >= shards_.size()) return std::nullopt;
    return shards_[pos_++];
  }

 private:
  std::vector<Shard> shards_;
  std::size_t pos_ = 0;
};

}  // namespace cdf
