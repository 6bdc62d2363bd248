// Copyright 2026 The muxgel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string_view>

namespace muxgel {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based stream: the n-th draw is mix64(key + n * golden), a pure
/// function of (key, n). Streams are keyed by a seed and a draw-site label so
/// adding a draw site never shifts the values another site sees.
class RandomStream {
 public:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  constexpr RandomStream(std::uint64_t seed, std::string_view label)
      : key_(mix64(seed ^ mix64(fnv1a64(label)))) {}

  constexpr std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform on [0,1).
  constexpr double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on [lo,hi]; returns lo when the interval is degenerate.
  constexpr double uniform(double lo, double hi) {
    if (!(hi > lo)) return lo;
    return lo + (hi - lo) * uniform();
  }

  /// Uniform integer on [lo,hi] inclusive.
  constexpr std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const auto span = static_cast<unsigned __int128>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>((span * next_u64()) >> 64);
  }

  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Seed of attempt `attempt` for sample `index` under `global_seed`. The
/// first attempt lives in the plain key space; retries set the top bit of the
/// attempt word, so retry streams never alias another sample's first draw.
constexpr std::uint64_t sample_seed(std::uint64_t global_seed, std::uint64_t index,
                                    std::uint64_t attempt = 0) {
  const std::uint64_t attempt_word = attempt == 0 ? 0 : (attempt | (1ULL << 63));
  return mix64(mix64(global_seed ^ mix64(index + RandomStream::kGolden)) ^
               mix64(attempt_word));
}

}  // namespace muxgel
