#pragma once

#include <cstdint>
#include <random>

namespace wdro {

/// Seeded 64-bit generator. Independent streams are derived from a base
/// seed and a stream id through a SplitMix64 finalizer, so each operation
/// (or each restart) draws from its own reproducible sequence.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
};

// Stream ids, one per consumer, so that adding a consumer never perturbs
// the sequence seen by another.
namespace streams {
inline constexpr std::uint64_t kGenerate = 1;
inline constexpr std::uint64_t kFlip = 2;
inline constexpr std::uint64_t kInject = 3;
inline constexpr std::uint64_t kStarts = 4;
}  // namespace streams

}  // namespace wdro
