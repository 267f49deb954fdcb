#pragma once

#include <cstdint>
#include <string_view>

namespace hpppf {

// Counter-based 64-bit generator. Output at counter i is the splitmix64
// finalizer applied to seed + i*GAMMA, so the stream is a pure function of
// (seed, i) and reproducible across languages. The exact constants and
// derivations are documented in the README ("Random numbers").
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t value_at(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + counter * kGamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return value_at(seed_, ++counter_); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be > 0. Computed as floor(u*n / 2^64);
  /// the modulo bias is below 2^-40 for any n used here.
  std::uint64_t next_index(std::uint64_t n) {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  /// Uniform double in [lo, hi).
  double next_range(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Stage seed derived from a master seed and an ASCII tag
  /// (FNV-1a of the tag, then one splitmix64 round).
  static std::uint64_t derive(std::uint64_t master, std::string_view tag) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : tag) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 0x100000001B3ULL;
    }
    return value_at(master ^ h, 1);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace hpppf
