// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace c4sim {

// splitmix64 finalizer; the fixed mixing constants make every derived
// stream reproducible across builds and platforms.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(mix64(a) ^ b); }

inline uint64_t hash_str(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based generator: state is (stream, counter), so sub-streams keyed
// by purpose tags stay stable when unrelated scenario sections change.
class Rng {
 public:
  Rng() = default;
  explicit Rng(uint64_t stream) : stream_(stream) {}
  Rng(uint64_t seed, std::string_view tag) : stream_(mix64(seed, hash_str(tag))) {}
  Rng(uint64_t seed, std::string_view tag, uint64_t idx)
      : stream_(mix64(mix64(seed, hash_str(tag)), idx)) {}

  uint64_t next_u64() { return mix64(stream_, counter_++); }

  //
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  int next_int(int lo, int hi) {  // inclusive range
    return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi - lo + 1)));
  }

  double next_double() {  // [0,1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  double exponential(double mean);

  int poisson(double mean);

  Rng fork(std::string_view tag, uint64_t idx = 0) const {
    return Rng(mix64(mix64(stream_, hash_str(tag)), idx));
  }

 private:
  uint64_t stream_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace c4sim
