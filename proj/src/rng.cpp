#include "cdf/rng.hpp"

#include <cmath>
#include <numbers>

namespace cdf {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t make_key(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream + 0xD1B54A32D192ED03ULL));
}
}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : key_(make_key(seed, stream)) {
  state_.seed = seed;
  state_.stream = stream;
}

RngStream::RngStream(const State& state) : state_(state), key_(make_key(state.seed, state.stream)) {}

RngStream RngStream::derive(std::uint64_t seed, std::uint32_t replication, std::uint32_t slot) {
  return RngStream(seed, (static_cast<std::uint64_t>(replication) << 32) | slot);
}

RngStream::result_type RngStream::operator()() {
  const std::uint64_t k = state_.counter++;
  return mix64(key_ + (k + 1) * kGolden);
}

double RngStream::uniform() {
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (state_.has_spare) {
    state_.has_spare = false;
    return state_.spare;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  state_.spare = r * std::sin(angle);
  state_.has_spare = true;
  return r * std::cos(angle);
}

}  // namespace cdf
