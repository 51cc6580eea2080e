#pragma once

#include <cmath>
#include <cstdint>

namespace brw {

// SplitMix64 finalizer. Bijective on 64-bit words, passes BigCrush when
// iterated over a Weyl sequence, which is how we use it below.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t key) noexcept {
  return mix64(seed ^ 0x5851f42d4c957f2dULL) ^ mix64(key + 0x14057b7ef767814fULL);
}

constexpr double u64_to_unit(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Counter-based stream: the i-th draw is a pure function of (seed, key, i).
// Any draw can be regenerated without replaying the sequence, and disjoint
// keys give independent streams, so parallel replicas stay reproducible.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t key) : base_(stream_key(seed, key)) {}

  std::uint64_t next_u64() noexcept { return mix64(base_ + 0x9e3779b97f4a7c15ULL * ++ctr_); }

  // uniform on [0,1)
  double uniform() noexcept { return u64_to_unit(next_u64()); }

  // Exp(rate)
  double exponential(double rate) noexcept { return -std::log1p(-uniform()) / rate; }

  std::uint64_t counter() const noexcept { return ctr_; }
  void set_counter(std::uint64_t c) noexcept { ctr_ = c; }

 private:
  std::uint64_t base_;
  std::uint64_t ctr_ = 0;
};

// One-shot draw keyed by (seed, site): used for i.i.d. fields indexed by
// lattice site, so any sub-window regenerates identically.
inline double site_uniform(std::uint64_t seed, std::int64_t site) noexcept {
  return u64_to_unit(mix64(stream_key(seed, static_cast<std::uint64_t>(site))));
}

}  // namespace brw
