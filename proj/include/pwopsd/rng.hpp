#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <string_view>

namespace pwopsd {

/// Identifier written into reports so that bootstrap draws can be matched
/// against another implementation configured with the same generator.
inline constexpr std::string_view kRngId = "mt19937_64+splitmix64-derive/v1";

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Folds a tag path into a root seed. Every random stream in the library is
/// addressed as (seed, tag...), so parallel and serial runs draw identically.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x632BE59BD9B4E019ULL));
  return h;
}

// Phase tags used with derive_seed.
namespace tag {
inline constexpr std::uint64_t kProblem = 0x70726f62;
inline constexpr std::uint64_t kSpine = 0x7370696e;
inline constexpr std::uint64_t kForced = 0x666f7263;
inline constexpr std::uint64_t kEnsemble = 0x656e736d;
inline constexpr std::uint64_t kBootstrap = 0x626f6f74;
inline constexpr std::uint64_t kTrain = 0x7472616e;
inline constexpr std::uint64_t kEval = 0x6576616c;
}  // namespace tag

/// Seeded generator whose derived draws do not depend on the standard
/// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (one deviate per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pwopsd
