#pragma once

#include <cstdint>

namespace surgsynth {

// SplitMix64 (Steele, Lea, Flood 2014). Output depends only on the 64-bit
// state, so streams are reproducible on every platform. Never use
// std::uniform_real_distribution here: its algorithm is implementation-defined.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Stream for (seed, index): the index is mixed through one SplitMix64 step
  // so neighbouring indices give unrelated streams.
  static SplitMix64 ForStream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 mixer(seed ^ (index * 0xD1B54A32D192ED03ull));
    return SplitMix64(mixer.next());
  }

 private:
  std::uint64_t state_;
};

}  // namespace surgsynth
