#pragma once

#include <cstdint>
#include <limits>

namespace homlab {

/// Counter-based random stream.
///
/// A stream is identified by (seed, stream, substream); its state is a pure
/// function of those keys, so any ensemble member can be regenerated
/// without replaying the others. That makes results independent of the
/// order in which worker threads pick up work. The generator itself is
/// SplitMix64 stepping from the derived key.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0,
                      std::uint64_t substream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform();

  /// Uniform index in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);

  /// Standard normal variate (Box-Muller, one value per call).
  double normal();

 private:
  std::uint64_t state_;
};

/// Bijective 64-bit finalizer used to derive stream keys.
std::uint64_t mix64(std::uint64_t x);

/// Named stream domains, so that e.g. the pilot run and the main ensemble of
/// the same delay never share draws.
namespace streams {
inline constexpr std::uint64_t kPhase = 0x70686173;      // "phas"
inline constexpr std::uint64_t kPilot = 0x70696c6f;      // "pilo"
inline constexpr std::uint64_t kBootstrap = 0x626f6f74;  // "boot"
inline constexpr std::uint64_t kCounts = 0x636e7473;     // "cnts"
}  // namespace streams

}  // namespace homlab
