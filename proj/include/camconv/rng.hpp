#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace camconv {

// Mixes a list of integers into one seed (splitmix64 finalizer per element).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

// mt19937_64 with distribution mappings written out explicitly, so streams are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace camconv
