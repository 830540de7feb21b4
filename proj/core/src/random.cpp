#include "qrljo/random.hpp"

#include <cmath>

namespace qrljo {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::log_uniform(double lo, double hi) {
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  return std::pow(10.0, a + (b - a) * uniform());
}

std::uint64_t Rng::index(std::uint64_t n) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

Rng Rng::split(std::uint64_t salt) { return Rng(mix_seed(engine_(), salt)); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace qrljo
