#pragma once

// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <string_view>

namespace vcrd {

// Deterministic counter-style RNG built on splitmix64. Streams are derived
// by hashing (seed, tags...) so that every consumer (rollouts, batch
// sampling, judge noise, ...) owns an independent substream that does not
// depend on scheduling or worker count.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be >= 1.
  std::uint32_t next_below(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

/// Builds the seed for a substream from a base seed plus mixing tags.
class StreamKey {
 public:
  explicit StreamKey(std::uint64_t seed) : h_(seed) { mix(0x5deece66dULL); }

  StreamKey& mix(std::uint64_t v) {
    h_ ^= v + 0x9e3779b97f4a7c15ULL + (h_ << 6) + (h_ >> 2);
    std::uint64_t s = h_;
    h_ = splitmix64_next(s);
    return *this;
  }

  StreamKey& mix(std::string_view tag) { return mix(fnv1a64(tag)); }

  RngStream stream() const { return RngStream(h_); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_;
};

template <typename... Tags>
RngStream derive_stream(std::uint64_t seed, Tags&&... tags) {
  StreamKey key(seed);
  (key.mix(tags), ...);
  return key.stream();
}

}  // namespace vcrd
