#pragma once

#include <cstdint>
#include <limits>

namespace cdf {

// Counter-based generator: draw k of a stream is a pure function of
// (seed, stream, k), so a state is fully described by those three numbers
// plus the cached Box-Muller partner.
class RngStream {
 public:
  using result_type = std::uint64_t;

  struct State {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t counter = 0;
    bool has_spare = false;
    double spare = 0.0;
  };

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0);
  explicit RngStream(const State& state);

  // Sub-stream for replication `replication` and model/algorithm slot `slot`.
  static RngStream derive(std::uint64_t seed, std::uint32_t replication, std::uint32_t slot);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  std::uint64_t seed() const { return state_.seed; }
  std::uint64_t stream() const { return state_.stream; }
  std::uint64_t counter() const { return state_.counter; }
  const State& state() const { return state_; }

 private:
  State state_;
  std::uint64_t key_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace cdf
