#ifndef PARSIMAX_RNG_HPP
#define PARSIMAX_RNG_HPP

// Stream derivation. Every random quantity is drawn from a std::mt19937_64
// seeded with derive_seed(parent, index), so results depend only on
// (seed, index) and never on which thread produced them.
//
//   replication r of an experiment:   derive_seed(master, r)
//   data inside a replication:        derive_seed(rep_seed, kDataStream)
//   sampler inside a replication:     derive_seed(rep_seed, kSamplerStream)
//   block b of simulated draws:       derive_seed(sampler_seed, b)

#include <cstdint>
#include <random>

namespace parsimax {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t kDataStream = 0x64617461ULL;     // "data"
inline constexpr std::uint64_t kSamplerStream = 0x73616d70ULL;  // "samp"

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(mix64(parent) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Engine make_engine(std::uint64_t parent, std::uint64_t index) {
  return Engine(derive_seed(parent, index));
}

}  // namespace parsimax

#endif  // PARSIMAX_RNG_HPP
