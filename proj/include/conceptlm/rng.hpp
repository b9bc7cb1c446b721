// Copyright (c) 2026, The conceptlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace conceptlm {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for stream `counter` of `master`. Every seeded component in the
// toolkit derives its seeds through this function.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  return mix64(mix64(master) ^ mix64(counter + 0x632be59bd9b4e019ULL));
}

// Fixed stream tags so independent consumers of one seed never collide.
namespace stream {
inline constexpr std::uint64_t kVocabulary = 1;
inline constexpr std::uint64_t kCorpus = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kSplit = 4;
inline constexpr std::uint64_t kShuffle = 5;
inline constexpr std::uint64_t kNoise = 6;
inline constexpr std::uint64_t kSubsample = 7;
inline constexpr std::uint64_t kClustering = 8;
inline constexpr std::uint64_t kBootstrap = 9;
inline constexpr std::uint64_t kSweepRun = 10;
inline constexpr std::uint64_t kHeldOut = 11;
inline constexpr std::uint64_t kPretrain = 12;
}  // namespace stream

inline Rng make_rng(std::uint64_t master, std::uint64_t stream_tag) {
  return Rng(derive_seed(master, stream_tag));
}

// Uniform integer in [0, n) that does not depend on libstdc++'s
// distribution internals, so seeded outputs are stable across toolchains.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Lemire-style rejection on the top of the range.
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace conceptlm
