#pragma once

#include <cstdint>

namespace fsg {

/// splitmix64. The state advances by the golden-ratio increment and each
/// output is the finalizer below applied to the new state, so any language
/// with 64-bit wrapping arithmetic reproduces the same stream:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
class SplitMix64 {
 public:
  static constexpr std::uint64_t kIncrement = 0x9E3779B97F4A7C15ULL;

  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t next() {
    state_ += kIncrement;
    return finalize(state_);
  }

  // Uniform in [0, 1) with 53 bits: (next() >> 11) * 2^-53.
  constexpr double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // next() mod n. The modulo bias is accepted (n is tiny next to 2^64).
  constexpr std::uint64_t below(std::uint64_t n) { return next() % n; }

 private:
  std::uint64_t state_;
};

// Seed of installation `index` in a corpus: the (index+1)-th splitmix64
// output from state `base`.
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  return SplitMix64::finalize(base + (index + 1) * SplitMix64::kIncrement);
}

}  // namespace fsg
