#pragma once

#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <random>
#include <utility>

namespace refx {

// Seedable generator with stable, platform-independent output.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Distributions are implemented here rather than taken from
// <random> because the standard leaves those implementation-defined.
//
// Stream splitting: Rng::stream(seed, {k1, k2, ...}) derives an independent
// engine seed by folding each key into the root seed with the SplitMix64
// finalizer. Monte Carlo work keyed by (feature, repeat) or (permutation)
// uses its own stream, so results do not depend on execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t derive(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> keys);
  static Rng stream(std::uint64_t seed,
                    std::initializer_list<std::uint64_t> keys) {
    return Rng(derive(seed, keys));
  }

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n), n > 0, by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; consumes exactly two draws per call.
  double normal();

  template <typename RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(std::distance(first, last));
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace refx
