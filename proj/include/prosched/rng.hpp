#pragma once

#include <cstdint>

namespace prosched {

// SplitMix64 finalizer; used both as a stream seeder and as a
// counter-based generator (hash of seed/counter pairs).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline double to_unit_interval(std::uint64_t x) {
  // 53-bit mantissa, offset by half a ulp so the result is strictly in (0,1).
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// Counter-based uniform stream: the value at (sample, dimension) does not
// depend on evaluation order, so parallel or batched sampling reproduces
// the exact same numbers.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  double uniform(std::uint64_t sample, std::uint64_t dimension) const {
    std::uint64_t h = splitmix64(seed_ ^ splitmix64(dimension));
    h = splitmix64(h ^ splitmix64(sample));
    return to_unit_interval(h);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace prosched
