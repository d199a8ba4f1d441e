#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace byzweight {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for the stream keyed by an ordered tuple, e.g. (master, round, client).
// Distinct tuples give unrelated streams, so work can run in any order.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (auto k : key) h = mix64(h ^ mix64(k));
  return h;
}

inline Rng make_rng(std::initializer_list<std::uint64_t> key) { return Rng(derive_seed(key)); }

// Stream tags keep the purposes of derived streams apart.
namespace stream {
inline constexpr std::uint64_t kTrainData = 0x7261696e;
inline constexpr std::uint64_t kTestData = 0x74657374;
inline constexpr std::uint64_t kClassMeans = 0x6d65616e;
inline constexpr std::uint64_t kPartition = 0x70617274;
inline constexpr std::uint64_t kShuffle = 0x73687566;
inline constexpr std::uint64_t kSelect = 0x73656c65;
inline constexpr std::uint64_t kClientRound = 0x636c6e74;
inline constexpr std::uint64_t kSubset = 0x73756273;
inline constexpr std::uint64_t kInit = 0x696e6974;
inline constexpr std::uint64_t kAttackers = 0x61747461;
inline constexpr std::uint64_t kTrial = 0x7472616c;
}  // namespace stream

}  // namespace byzweight
