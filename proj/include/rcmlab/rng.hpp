#pragma once
// Counter-based deterministic random numbers.
//
// Every random quantity in the lab is a pure function of (key, counter) so that
// lazily evaluated environments return the same value no matter when, where or
// on which thread an edge is queried, and so that walker streams are
// reproducible regardless of scheduling.  The generator is the splitmix64
// sequence: out_k = finalize(key + k * golden), with the usual 64-bit
// avalanche finalizer.  Keys for sub-streams are derived by hashing a salt and
// the identifying words (seed, walker index, edge coordinates, ...).

#include <cmath>
#include <cstdint>

namespace rcmlab {

inline constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// murmur/splitmix style 64-bit avalanche
inline uint64_t fmix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t hash_fold(uint64_t h, uint64_t w) {
  return fmix64((h + kGolden) ^ w);
}

// domain separation salts (arbitrary fixed odd constants)
inline constexpr uint64_t kSaltEdge = 0x45dcb2a7f01e6ea1ULL;
inline constexpr uint64_t kSaltWalker = 0x9f14bb2e3c8d5b03ULL;
inline constexpr uint64_t kSaltEnvSeed = 0x6a09e667f3bcc909ULL;
inline constexpr uint64_t kSaltScalar = 0xbb67ae8584caa73bULL;

// u64 -> double in [0, 1), 53 random bits
inline double unit_from_bits(uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}
// u64 -> double in (0, 1], safe operand for log()
inline double unit_open_from_bits(uint64_t x) {
  return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

// Stateful view of a counter-based stream.  Copyable; copying forks the
// remaining sequence (both copies see the same draws), so pass by reference
// when draws must not repeat.
struct CounterRng {
  uint64_t key = 0;
  uint64_t counter = 0;

  uint64_t next_u64() { return fmix64(key + kGolden * (++counter)); }
  double next_unit() { return unit_from_bits(next_u64()); }
  double next_unit_open() { return unit_open_from_bits(next_u64()); }
  // Exponential holding time with the given rate.
  double next_exponential(double rate) {
    return -std::log(next_unit_open()) / rate;
  }
};

// Derive the key for an independent sub-stream.
inline CounterRng derive_stream(uint64_t salt, uint64_t seed, uint64_t index) {
  uint64_t k = hash_fold(hash_fold(salt, seed), index);
  return CounterRng{k, 0};
}

}  // namespace rcmlab
