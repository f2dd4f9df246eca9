// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace msep {

// splitmix64; used to derive independent seeds from (seed, stream id) pairs.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ stream);
}

inline uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t stream = 0) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed) ^ h ^ splitmix64(stream));
}

// mt19937_64 engine with hand-rolled distributions. The standard pins the
// engine output bit-exactly but not the distributions, so uniform/gaussian
// are implemented here to keep seeded runs reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [lo, hi] inclusive, unbiased via rejection
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<int64_t>(eng_());  // full 64-bit span
    uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return lo + static_cast<int64_t>(x % range);
  }

  // Box-Muller, two engine draws per call
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 0x1.0p-100) u1 = 0x1.0p-100;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace msep
