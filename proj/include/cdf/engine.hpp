#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cdf/linalg.hpp"
#include "cdf/rng.hpp"
#include "cdf/shard.hpp"

namespace cdf {

using ParamId = std::string;

// Disjoint parameter groups G_1..G_k, visited in declared order.
struct Partition {
  std::vector<std::vector<ParamId>> groups;

  std::size_t size() const { return groups.size(); }
  std::vector<ParamId> parameters() const;
  // Throws ArgumentError unless the groups are pairwise disjoint and cover `all` exactly.
  void validate(const std::vector<ParamId>& all) const;
};

enum class StatShape { kScalar, kVector, kMatrix };

// A propagated surrogate conditional sufficient statistic C^{(t)}.
class SurrogateStat {
 public:
  SurrogateStat() = default;
  SurrogateStat(std::string id, Matrix initial, StatShape shape);

  const std::string& id() const { return id_; }
  const Matrix& value() const { return value_; }
  StatShape shape() const { return shape_; }
  double scalar() const { return value_(0, 0); }
  Vector vector() const { return value_.col(0); }
  std::size_t updates() const { return updates_; }
  std::size_t last_update() const { return last_t_; }
  std::size_t bytes() const { return static_cast<std::size_t>(value_.size()) * sizeof(double); }

 private:
  friend class SamplerState;
  friend struct SnapshotAccess;
  std::string id_;
  Matrix value_;
  StatShape shape_ = StatShape::kMatrix;
  std::size_t updates_ = 0;
  std::size_t last_t_ = 0;
};

class SamplerState {
 public:
  SamplerState() = default;
  explicit SamplerState(RngStream rng) : rng(rng) {}

  std::size_t t = 0;
  RngStream rng;
  std::map<ParamId, Vector> estimates;
  // Model working memory that must survive between shards (latent windows,
  // retained observations, current chain position).
  std::map<std::string, Matrix> aux;

  void declare_scalar(const std::string& id, double initial = 0.0);
  void declare_vector(const std::string& id, Eigen::Index n);
  void declare_matrix(const std::string& id, Eigen::Index rows, Eigen::Index cols);

  // Applies `rule` to the statistic. Allowed once per shard; the shape may
  // not change and the result must be finite.
  void update_stat(const std::string& id, const std::function<void(Matrix&)>& rule);

  bool has_stat(const std::string& id) const { return scss_.contains(id); }
  const SurrogateStat& stat(const std::string& id) const;
  double scalar(const std::string& id) const { return stat(id).scalar(); }
  Vector vector(const std::string& id) const { return stat(id).vector(); }
  const Matrix& matrix(const std::string& id) const { return stat(id).value(); }
  const std::map<std::string, SurrogateStat>& scss() const { return scss_; }

  const Vector& estimate(const ParamId& id) const;
  double scalar_estimate(const ParamId& id) const { return estimate(id)(0); }
  Matrix& aux_at(const std::string& key);
  const Matrix& aux_at(const std::string& key) const;

  std::size_t scss_bytes() const;
  std::size_t aux_bytes() const;

 private:
  friend struct SnapshotAccess;
  void declare(const std::string& id, Matrix initial, StatShape shape);
  std::map<std::string, SurrogateStat> scss_;
};

// S approximate posterior draws per parameter at shard t (S x dim each).
struct DrawBatch {
  std::size_t t = 0;
  std::map<ParamId, Matrix> draws;

  void resize(const ParamId& id, Eigen::Index s, Eigen::Index dim) { draws[id].resize(s, dim); }
  // Common draw count; throws InvalidStateError if parameters disagree.
  Eigen::Index draw_count() const;
  Vector mean(const ParamId& id) const;
  const Matrix& at(const ParamId& id) const;
};

struct EngineConfig {
  std::size_t draws = 500;
  // Sweeps discarded before recording within each shard.
  std::size_t burnin = 0;
};

// Model-specific rules plugged into the C-DF driver. Exact (batch) samplers
// implement the same interface with a single group, so both algorithms share
// one driver, one snapshot format and one memory accounting.
class ModelHooks {
 public:
  virtual ~ModelHooks() = default;

  virtual std::string name() const = 0;
  virtual Partition partition() const = 0;
  virtual void validate_shard(const Shard& shard, const SamplerState& state) const = 0;
  // Called once, before the first shard is processed.
  virtual void initialize(SamplerState& state, const Shard& first) = 0;
  virtual void update_scss(std::size_t group, const Shard& shard, SamplerState& state) = 0;
  virtual void sample(std::size_t group, const Shard& shard, SamplerState& state,
                      const EngineConfig& config, DrawBatch& batch) = 0;
  // Returns true when the model set closed-form estimates for the group itself;
  // otherwise the driver uses Monte Carlo means of the group's draws.
  virtual bool closed_form_estimates(std::size_t group, SamplerState& state,
                                     const DrawBatch& batch) {
    (void)group;
    (void)state;
    (void)batch;
    return false;
  }
  // Bytes of propagated statistics plus retained data.
  virtual std::size_t retained_bytes(const SamplerState& state) const {
    return state.scss_bytes() + state.aux_bytes();
  }
};

// Runs the sweeps of one group, calling body(record_index) with -1 during burn-in.
void for_each_sweep(const EngineConfig& config, const std::function<void(long)>& body);

// One pass of the C-DF driver over a shard: for each group in order update
// its statistics, draw S sweeps, refresh its estimates.
DrawBatch step_shard(SamplerState& state, const Shard& shard, ModelHooks& model,
                     const EngineConfig& config);

using BatchCallback = std::function<void(const DrawBatch&, const SamplerState&)>;

// Folds step_shard over the stream. Errors are rethrown as StreamError with
// the 1-based shard index. Returns the number of shards processed.
std::size_t run_stream(ShardSource& stream, ModelHooks& model, const EngineConfig& config,
                       SamplerState& state, const BatchCallback& on_batch);
std::vector<DrawBatch> run_stream(ShardSource& stream, ModelHooks& model,
                                  const EngineConfig& config, SamplerState& state);

struct RandomWalk {
  double step = 0.1;
};

struct MetropolisResult {
  double value;
  bool accepted;
};

// Symmetric random-walk Metropolis update of a scalar. Proposals with
// log target -inf are never accepted; a current value with log target -inf
// throws InvalidStateError.
MetropolisResult metropolis_step(double current, const std::function<double(double)>& log_target,
                                 const RandomWalk& proposal, RngStream& rng);

}  // namespace cdf
