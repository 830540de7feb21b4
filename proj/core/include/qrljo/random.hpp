#ifndef QRLJO_RANDOM_HPP_
#define QRLJO_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace qrljo {

// Seeded generator with platform-independent draws. The standard
// distributions are implementation-defined, so we derive every draw from raw
// 64-bit engine output instead; generated workloads are then identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // 10^U(log10 lo, log10 hi).
  double log_uniform(double lo, double hi);
  // Uniform integer in [0, n); n > 0.
  std::uint64_t index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  // Derives an independent child stream, e.g. one per query.
  Rng split(std::uint64_t salt);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; mixes seeds for derived streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace qrljo

#endif  // QRLJO_RANDOM_HPP_
