#include "pdsa/rng.hpp"

#include <cmath>

namespace pdsa {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t deriveSeed(std::uint64_t master, std::uint64_t counter) {
  // counter+1 keeps stream 0 distinct from the raw master seed.
  return splitmix64(master + (counter + 1) * kGolden);
}

double Rng::gaussian() {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double Rng::uniformUnit() {
  return (2.0 * uniform01() - 1.0) * 1.7320508075688772935274463415059;
}

}  // namespace pdsa
