#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace malfuse {

// SplitMix64 step; also used to expand seeds and derive independent streams.
std::uint64_t splitmix64(std::uint64_t& state);

// Seed of the child stream `stream` under `parent`. Distinct stream ids give
// statistically independent xoshiro seeds.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);

// xoshiro256** 1.0 (Blackman & Vigna), seeded through SplitMix64.
// The algorithm is fixed so generated data is identical on every platform.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();
  std::uint64_t operator()() { return next(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  // Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform_open();
  // Uniform integer in [0, bound) by rejection (unbiased).
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via the inverse CDF of uniform_open().
  double normal();

 private:
  std::uint64_t s_[4];
};

// Acklam's rational approximation of the standard normal quantile
// (relative error below 1.15e-9 on (0,1)).
double normal_quantile(double p);

// Fisher-Yates shuffle driven by Xoshiro256::below.
template <typename T>
void shuffle(std::span<T> items, Xoshiro256& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace malfuse
