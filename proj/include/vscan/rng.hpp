#pragma once

#include <cstdint>
#include <initializer_list>

namespace vscan {

// SplitMix64 finaliser. Used to expand seeds and derive independent streams.
std::uint64_t splitmix64(std::uint64_t& state);

// xorshift64* generator (Vigna 2016): shifts 12/25/27, multiplier
// 0x2545F4914F6CDD1D. The state is initialised by one SplitMix64 step of the
// seed, and a zero state is replaced by 0x9E3779B97F4A7C15. The algorithm is
// fixed so traces can be regenerated bit for bit in any language.
class Xorshift64Star {
 public:
  using result_type = std::uint64_t;

  explicit Xorshift64Star(std::uint64_t seed);

  // Generator for the stream identified by (seed, tags...). Each tag is folded
  // in with a SplitMix64 step, so distinct tag tuples give unrelated streams.
  static Xorshift64Star stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

  // Uniform double in [0, 1) from the top 53 bits.
  double uniform();
  // Uniform double in [lo, hi).
  double uniform(double lo, double hi);

 private:
  std::uint64_t state_;
};

}  // namespace vscan
