/// @file rng.hpp
/// @brief Deterministic random streams with platform-independent draws.
///
/// All randomness in the library flows through this class. Draw functions
/// avoid std::uniform_*_distribution on purpose: their output is not pinned
/// by the standard, while mt19937_64 itself is, so the combination below is
/// bit-reproducible across compilers and platforms.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace rfqmm {

/// One splitmix64 step; also used to derive sub-stream seeds.
uint64_t splitmix64_next(uint64_t& state);

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  /// Independent named stream derived from a master seed. The (name, index)
  /// pair identifies the consumer, e.g. ("rollout", step * 1000 + k).
  static Rng stream(uint64_t master, std::string_view name, uint64_t index = 0);

  uint64_t next() { return gen_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Uniform integer in [0, n), Lemire's unbiased method.
  uint64_t below(uint64_t n);

  /// Fisher-Yates shuffle driven by below().
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Textual engine state, for checkpoints; format is standard-specified.
  std::string state_string() const;
  void set_state_string(const std::string& s);

 private:
  std::mt19937_64 gen_;
};

}  // namespace rfqmm
