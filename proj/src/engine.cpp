#include "cdf/engine.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "cdf/error.hpp"

namespace cdf {

std::vector<ParamId> Partition::parameters() const {
  std::vector<ParamId> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

void Partition::validate(const std::vector<ParamId>& all) const {
  std::set<ParamId> seen;
  for (const auto& g : groups) {
    for (const auto& id : g) {
      if (!seen.insert(id).second) {
        throw ArgumentError("partition: parameter '" + id + "' appears in more than one group");
      }
    }
  }
  const std::set<ParamId> expected(all.begin(), all.end());
  if (seen != expected) throw ArgumentError("partition: groups do not cover the parameter set");
}

SurrogateStat::SurrogateStat(std::string id, Matrix initial, StatShape shape)
    : id_(std::move(id)), value_(std::move(initial)), shape_(shape) {}

void SamplerState::declare(const std::string& id, Matrix initial, StatShape shape) {
  if (scss_.contains(id)) throw InvalidStateError("statistic '" + id + "' declared twice");
  scss_.emplace(id, SurrogateStat(id, std::move(initial), shape));
}

void SamplerState::declare_scalar(const std::string& id, double initial) {
  declare(id, Matrix::Constant(1, 1, initial), StatShape::kScalar);
}

void SamplerState::declare_vector(const std::string& id, Eigen::Index n) {
  declare(id, Matrix::Zero(n, 1), StatShape::kVector);
}

void SamplerState::declare_matrix(const std::string& id, Eigen::Index rows, Eigen::Index cols) {
  declare(id, Matrix::Zero(rows, cols), StatShape::kMatrix);
}

void SamplerState::update_stat(const std::string& id, const std::function<void(Matrix&)>& rule) {
  auto it = scss_.find(id);
  if (it == scss_.end()) throw InvalidStateError("unknown statistic '" + id + "'");
  SurrogateStat& s = it->second;
  if (s.updates_ > 0 && s.last_t_ == t) {
    throw InvalidStateError("statistic '" + id + "' updated twice in shard " + std::to_string(t));
  }
  const Eigen::Index rows = s.value_.rows();
  const Eigen::Index cols = s.value_.cols();
  rule(s.value_);
  if (s.value_.rows() != rows || s.value_.cols() != cols) {
    throw InvalidStateError("statistic '" + id + "' changed shape during update");
  }
  if (!s.value_.allFinite()) {
    throw NumericOverflowError(id, "statistic '" + id + "' is non-finite after update at shard " +
                                       std::to_string(t));
  }
  ++s.updates_;
  s.last_t_ = t;
}

const SurrogateStat& SamplerState::stat(const std::string& id) const {
  auto it = scss_.find(id);
  if (it == scss_.end()) throw InvalidStateError("unknown statistic '" + id + "'");
  return it->second;
}

const Vector& SamplerState::estimate(const ParamId& id) const {
  auto it = estimates.find(id);
  if (it == estimates.end()) throw InvalidStateError("no estimate for '" + id + "'");
  return it->second;
}

Matrix& SamplerState::aux_at(const std::string& key) {
  auto it = aux.find(key);
  if (it == aux.end()) throw InvalidStateError("missing model state '" + key + "'");
  return it->second;
}

const Matrix& SamplerState::aux_at(const std::string& key) const {
  auto it = aux.find(key);
  if (it == aux.end()) throw InvalidStateError("missing model state '" + key + "'");
  return it->second;
}

std::size_t SamplerState::scss_bytes() const {
  std::size_t b = 0;
  for (const auto& [id, s] : scss_) b += s.bytes();
  return b;
}

std::size_t SamplerState::aux_bytes() const {
  std::size_t b = 0;
  for (const auto& [k, m] : aux) b += static_cast<std::size_t>(m.size()) * sizeof(double);
  return b;
}

Eigen::Index DrawBatch::draw_count() const {
  Eigen::Index s = -1;
  for (const auto& [id, m] : draws) {
    if (s < 0) s = m.rows();
    else if (m.rows() != s) {
      throw InvalidStateError("draw batch: parameter '" + id + "' has " + std::to_string(m.rows()) +
                              " draws, expected " + std::to_string(s));
    }
  }
  return s < 0 ? 0 : s;
}

const Matrix& DrawBatch::at(const ParamId& id) const {
  auto it = draws.find(id);
  if (it == draws.end()) throw InvalidStateError("draw batch has no parameter '" + id + "'");
  return it->second;
}

Vector DrawBatch::mean(const ParamId& id) const {
  const Matrix& m = at(id);
  return m.colwise().mean().transpose();
}

void for_each_sweep(const EngineConfig& config, const std::function<void(long)>& body) {
  const long total = static_cast<long>(config.burnin + config.draws);
  const long burn = static_cast<long>(config.burnin);
  for (long s = 0; s < total; ++s) body(s < burn ? -1 : s - burn);
}

DrawBatch step_shard(SamplerState& state, const Shard& shard, ModelHooks& model,
                     const EngineConfig& config) {
  if (config.draws < 1) throw ArgumentError("step_shard: need at least one draw per shard");
  model.validate_shard(shard, state);
  if (state.t == 0) model.initialize(state, shard);
  state.t += 1;

  DrawBatch batch;
  batch.t = state.t;
  const Partition partition = model.partition();
  for (std::size_t l = 0; l < partition.size(); ++l) {
    model.update_scss(l, shard, state);
    model.sample(l, shard, state, config, batch);
    if (!model.closed_form_estimates(l, state, batch)) {
      for (const auto& id : partition.groups[l]) {
        if (batch.draws.contains(id)) state.estimates[id] = batch.mean(id);
      }
    }
  }
  batch.draw_count();
  return batch;
}

std::size_t run_stream(ShardSource& stream, ModelHooks& model, const EngineConfig& config,
                       SamplerState& state, const BatchCallback& on_batch) {
  std::size_t count = 0;
  while (auto shard = stream.next()) {
    ++count;
    DrawBatch batch;
    try {
      batch = step_shard(state, *shard, model, config);
    } catch (const StreamError&) {
      throw;
    } catch (const std::exception& e) {
      throw StreamError(count, "shard " + std::to_string(count) + ": " + e.what());
    }
    if (on_batch) on_batch(batch, state);
  }
  if (count == 0) throw ArgumentError("run_stream: empty stream");
  return count;
}

std::vector<DrawBatch> run_stream(ShardSource& stream, ModelHooks& model,
                                  const EngineConfig& config, SamplerState& state) {
  std::vector<DrawBatch> out;
  run_stream(stream, model, config, state,
             [&](const DrawBatch& b, const SamplerState&) { out.push_back(b); });
  return out;
}

MetropolisResult metropolis_step(double current, const std::function<double(double)>& log_target,
                                 const RandomWalk& proposal, RngStream& rng) {
  const double lc = log_target(current);
  if (std::isnan(lc) || lc == -std::numeric_limits<double>::infinity()) {
    throw InvalidStateError("metropolis_step: target density is zero at the current value");
  }
  const double candidate = current + proposal.step * rng.normal();
  const double u = rng.uniform();
  const double lp = log_target(candidate);
  if (!(lp > -std::numeric_limits<double>::infinity()) || std::isnan(lp)) {
    return {current, false};
  }
  if (std::log(u) < lp - lc) return {candidate, candidate != current};
  return {current, false};
}

}  // namespace cdf
