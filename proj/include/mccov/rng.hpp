#pragma once

#include <cmath>
#include <cstdint>

namespace mccov {

// Deterministic stream RNG. Streams are derived from (seed, stream id) so
// work split across threads by stream draws identical numbers regardless
// of scheduling. Core generator is splitmix64; normal deviates use
// Box-Muller on fixed uniform pairs (no rejection), so every consumer
// advances the stream by a fixed count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {
    next_u64();  // decorrelate trivially related seeds
  }

  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    Rng r(mix(seed) ^ mix(stream_id * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL));
    return r;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0,1): never returns 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double lognormal(double mu, double sigma) { return std::exp(mu + sigma * normal()); }

  // Exact Poisson; large means split into <=30 chunks (Poisson is
  // infinitely divisible) so exp(-mu) never underflows.
  long poisson(double mean) {
    long total = 0;
    while (mean > 30.0) {
      total += poisson_small(30.0);
      mean -= 30.0;
    }
    return total + poisson_small(mean);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
    z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    return z ^ (z >> 33);
  }

  long poisson_small(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    long k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  std::uint64_t state_;
};

}  // namespace mccov
