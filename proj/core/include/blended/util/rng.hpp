#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace blended {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named seed derivation: every random stream in a run comes from
// (run seed, component, index) so parallel and sequential runs agree.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view component,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ fnv1a(component)) + index);
}

inline Rng make_rng(std::uint64_t base, std::string_view component, std::uint64_t index = 0) {
  return Rng(derive_seed(base, component, index));
}

// Uniform integer in [lo, hi]. Implemented here instead of
// std::uniform_int_distribution so streams are identical across standard libraries.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(rng());
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return lo + static_cast<std::int64_t>(r % span);
}

inline double uniform_real(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace blended
