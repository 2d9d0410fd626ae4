#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sdtp {

// Simulated time in integer microseconds. All scheduling is integral so that
// event ordering never depends on floating-point rounding.
using SimTime = std::int64_t;
using SeqNo = std::uint32_t;

inline constexpr SimTime kNoTime = -1;
// Sequence sentinel for an open-ended ("set as infinity") interval end.
inline constexpr SeqNo kSeqInfinity = 0xFFFF'FFFFu;

inline SimTime us_from_ms(double ms) {
  return static_cast<SimTime>(std::llround(ms * 1000.0));
}

inline double ms_from_us(SimTime us) { return static_cast<double>(us) / 1000.0; }

inline std::string strf(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  int n = std::vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  if (n < 0) return {};
  if (static_cast<size_t>(n) < sizeof(buf)) return std::string(buf, n);
  std::string big(static_cast<size_t>(n) + 1, '\0');
  va_start(ap, fmt);
  std::vsnprintf(big.data(), big.size(), fmt, ap);
  va_end(ap);
  big.resize(static_cast<size_t>(n));
  return big;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent deterministic stream per label: editing one part of a scenario
// never perturbs another part's random sequence.
inline std::uint64_t stream_seed(std::uint64_t global_seed, std::string_view label) {
  return splitmix64(splitmix64(global_seed) ^ fnv1a64(label));
}

// Bernoulli draw using the raw (standardized) mt19937_64 output against an
// integer threshold, so traces are bit-stable across standard libraries.
inline bool bernoulli(std::mt19937_64& rng, double p) {
  if (p <= 0.0) {
    return false;
  }
  if (p >= 1.0) {
    (void)rng();
    return true;
  }
  auto threshold = static_cast<std::uint64_t>(p * 18446744073709551616.0 /* 2^64 */);
  return rng() < threshold;
}

// Internal invariant check that still fires in release builds; simulator
// state corruption must never pass silently.
inline void require(bool cond, const char* what) {
  if (!cond) throw std::logic_error(std::string("sdtp internal invariant violated: ") + what);
}

}  // namespace sdtp
