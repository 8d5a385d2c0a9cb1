#include "vscan/rng.hpp"

namespace vscan {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Xorshift64Star::Xorshift64Star(std::uint64_t seed) {
  std::uint64_t s = seed;
  state_ = splitmix64(s);
  if (state_ == 0) state_ = 0x9E3779B97F4A7C15ull;
}

Xorshift64Star Xorshift64Star::stream(std::uint64_t seed,
                                      std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = seed;
  std::uint64_t mixed = splitmix64(s);
  for (auto tag : tags) {
    std::uint64_t t = mixed ^ tag;
    mixed = splitmix64(t);
  }
  return Xorshift64Star(mixed);
}

Xorshift64Star::result_type Xorshift64Star::operator()() {
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 0x2545F4914F6CDD1Dull;
}

double Xorshift64Star::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Xorshift64Star::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

}  // namespace vscan
