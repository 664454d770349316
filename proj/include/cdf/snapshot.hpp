#pragma once

#include <filesystem>

#include <json.hpp>

#include "cdf/engine.hpp"

namespace cdf {

inline constexpr int kSnapshotVersion = 1;

// Versioned record of a SamplerState: statistic ids, shapes, values and
// update counters, estimates, model working memory, t, and the RNG
// (seed, stream, counter). Doubles are written in shortest round-trip form,
// so save -> load reproduces the state bit for bit.
nlohmann::json snapshot_to_json(const SamplerState& state);
SamplerState snapshot_from_json(const nlohmann::json& j);

void save_snapshot(const SamplerState& state, const std::filesystem::path& path);
SamplerState load_snapshot(const std::filesystem::path& path);

}  // namespace cdf
