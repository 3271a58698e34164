#pragma once

#include <cstdint>

namespace critics::rng {

// splitmix64 finalizer. Used instead of <random> distributions, whose output
// is implementation-defined, so seeded runs are identical across toolchains.
constexpr std::uint64_t mix(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// One 64-bit draw from the stream identified by (seed, key).
constexpr std::uint64_t keyed(std::uint64_t seed, std::uint64_t key) noexcept {
  return mix(mix(seed) ^ key);
}

/// Maps a 64-bit draw onto [0, n) by multiply-shift.
constexpr std::uint64_t bounded(std::uint64_t draw, std::uint64_t n) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(draw) * n) >> 64);
}

// Stream keys for the places that draw randomness.
inline constexpr std::uint64_t kSentenceStream = 0x73656e74ULL;   // "sent"
inline constexpr std::uint64_t kEvaluatorStream = 0x6576616cULL;  // "eval"
inline constexpr std::uint64_t kJudgeStream = 0x6a756467ULL;      // "judg"

}  // namespace critics::rng
