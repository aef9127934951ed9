#pragma once

#include <cstdint>
#include <random>

namespace pdsa {

// Stream seed for replication `counter` under a master seed. Counter-based
// (splitmix64 finalizer on an additive sequence), so any replication can be
// seeded in O(1) no matter how work is scheduled across threads.
std::uint64_t deriveSeed(std::uint64_t master, std::uint64_t counter);

// Deterministic random stream. Uses std::mt19937_64 for raw bits but applies
// its own uniform/gaussian transforms: the standard leaves distribution
// algorithms implementation-defined, and outputs here must be reproducible
// byte for byte across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes exactly two raw draws.
  double gaussian();

  // Uniform on [-sqrt(3), sqrt(3)): zero mean, unit variance.
  double uniformUnit();

  // +1 or -1 with equal probability.
  double rademacher() { return (gen_() >> 63) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace pdsa
