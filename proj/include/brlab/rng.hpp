#pragma once

#include <cmath>
#include <cstdint>

namespace brlab {

// Counter-based generator: every draw is a pure function of (seed, stream, counter),
// so per-path / per-instance substreams need no shared state.
//
// Mixing function from SplitMix64 (Steele, Lea, Flood; finalizer by Vigna).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(splitmix64(splitmix64(seed) ^ (0x9e3779b97f4a7c15ULL * (stream + 1)))) {}

  // derive an independent substream deterministically
  CounterRng split(std::uint64_t substream) const {
    CounterRng r(0);
    r.state_ = splitmix64(state_ ^ splitmix64(substream + 0x632be59bd9b4e019ULL));
    r.counter_ = 0;
    return r;
  }

  std::uint64_t next_u64() { return splitmix64(state_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1], safe as argument of log
  double next_double_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  double next_normal() {
    // Box-Muller; one value per call keeps the draw count deterministic
    double u = next_double_pos();
    double v = next_double();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
  }

  // fair +-1
  double next_sign() { return (next_u64() & 1) ? 1.0 : -1.0; }

  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
  std::uint64_t state_;
  std::uint64_t counter_ = 0;
};

} // namespace brlab
