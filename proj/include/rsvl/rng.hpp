#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace rsvl {

// Seedable generator with cross-platform reproducible output.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The std:: distributions are not (their algorithms are left to
// the library vendor), so every derived draw below is computed here:
//   uniform01()  : top 53 bits of one engine output, scaled by 2^-53.
//   below(n)     : Lemire's multiply-shift with rejection, unbiased.
//   shuffle()    : Fisher-Yates from the back using below().
//   normal()     : Box-Muller on two uniform01() draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform01();

  // Uniform in [lo, hi].
  double uniform(double lo, double hi);

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rsvl
