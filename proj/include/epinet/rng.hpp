#pragma once

#include <cstdint>
#include <random>

namespace epinet {

/// Identifies one reproducible random stream. Replicas of an ensemble use
/// the same seed with stream = replicate index; identical (seed, stream)
/// yields an identical trajectory on any platform and worker count.
struct RngSpec {
  std::uint64_t seed = 12345;
  std::uint64_t stream = 0;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// mt19937_64 with explicit uniform/exponential transforms. The standard
/// fully specifies the engine but not the library distributions, so the
/// transforms are spelled out here to keep outputs byte-identical across
/// toolchains.
class Rng {
 public:
  explicit Rng(RngSpec spec) {
    std::uint64_t s = spec.seed;
    detail::splitmix64(s);
    s ^= (spec.stream + 1) * 0x9e3779b97f4a7c15ULL;
    engine_.seed(detail::splitmix64(s));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Exponential with the given rate (> 0).
  double exponential(double rate) {
    return -std::log1p(-uniform01()) / rate;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace epinet
