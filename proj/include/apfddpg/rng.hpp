#pragma once

#include <cassert>
#include <cstdint>
#include <limits>
#include <random>

namespace apfddpg {

/// splitmix64 finalizer, used to decorrelate seeds derived from small integers.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Independent random streams owned by one experimental run. Consumers draw
/// from their own stream, so adding a consumer never perturbs the others.
enum class Stream : std::uint64_t {
  kCriticInit = 1,
  kActorInit = 2,
  kApfInit = 3,
  kExplore = 4,
  kReplay = 5,
  kApfSample = 6,
};

inline std::uint64_t stream_seed(std::uint64_t run_seed, Stream stream) {
  return mix_seed(run_seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(stream));
}

/// Deterministic RNG with platform-independent output. The mt19937_64 bit
/// stream is standardized; the floating point and integer mappings below
/// avoid the implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    assert(n > 0);
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace apfddpg
