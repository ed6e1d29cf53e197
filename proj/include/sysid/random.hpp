#pragma once

#include <cstdint>
#include <random>

namespace sysid {

/// Seeded source of the Gaussian and uniform draws used by simulations.
/// Not thread-safe; each concurrent consumer owns its own stream.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double normal(double stddev) { return stddev * normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for cell (sweep_point, trial) of a run:
///   mix64(mix64(master) + (sweep_point << 32 | trial)).
/// Injective in (sweep_point, trial) for both indices below 2^32.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint32_t sweep_point,
                                    std::uint32_t trial) noexcept {
  const std::uint64_t counter = (static_cast<std::uint64_t>(sweep_point) << 32) | trial;
  return mix64(mix64(master) + counter);
}

}  // namespace sysid
