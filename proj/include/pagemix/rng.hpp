#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace pagemix {

/// Seeded generator with a pinned algorithm so that samples are reproducible
/// across compilers and standard libraries:
///   state  = four words from SplitMix64(seed)
///   output = xoshiro256** (Blackman & Vigna)
///   uniform()   = (next() >> 11) * 2^-53
///   below(b)    = Lemire multiply-shift with rejection
/// Substreams for replica r derive their seed as seed ^ (r * 0x9E3779B97F4A7C15).
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    __uint128_t product = static_cast<__uint128_t>(next()) * bound;
    auto low = static_cast<std::uint64_t>(product);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        product = static_cast<__uint128_t>(next()) * bound;
        low = static_cast<std::uint64_t>(product);
      }
    }
    return static_cast<std::uint64_t>(product >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Binomial(trials, p) by sequential CDF inversion. Expected cost is
  /// O(trials * p), which stays small for the bounded-mean draws used here.
  std::int64_t binomial(std::int64_t trials, double p) {
    if (trials <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    if (p > 0.5) return trials - binomial(trials, 1.0 - p);
    const double ratio = p / (1.0 - p);
    double pmf = std::exp(static_cast<double>(trials) * std::log1p(-p));
    double cdf = pmf;
    const double u = uniform();
    std::int64_t k = 0;
    while (u >= cdf && k < trials) {
      pmf *= ratio * static_cast<double>(trials - k) / static_cast<double>(k + 1);
      ++k;
      cdf += pmf;
    }
    return k;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_[4]{};
};

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed ^ (stream * 0x9E3779B97F4A7C15ULL);
}

}  // namespace pagemix
