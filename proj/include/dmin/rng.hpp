#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace dmin {

// xoshiro256** seeded through SplitMix64. Every random draw in the library
// goes through this generator so results depend only on the seed.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next(); }

  std::uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound); bound > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via Box-Muller (one draw per call, the sine branch is discarded).
  double normal();

  // Fisher-Yates; `count` leading entries of `items` become a uniform sample
  // without replacement.
  template <typename T>
  void partial_shuffle(std::vector<T>& items, std::size_t count) {
    for (std::size_t i = 0; i < count && i + 1 < items.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(items.size() - i));
      std::swap(items[i], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    partial_shuffle(items, items.size());
  }

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

// Seed for stream `index` under a master seed. Streams are independent of the
// order in which they are requested.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace dmin
