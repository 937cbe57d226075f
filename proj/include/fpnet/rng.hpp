#pragma once

#include <cstdint>
#include <random>

namespace fpnet {

/// Purposes for which a run draws randomness. Each purpose gets an
/// independent stream so that, e.g., changing the compressor does not
/// perturb the oracle noise sequence.
enum class StreamPurpose : std::uint64_t {
  oracle = 1,
  compressor = 2,
  schedule = 3,
  graph = 4,
  init = 5,
  certify = 6,
  misc = 7,
};

/// SplitMix64 finaliser; used only to derive stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based stream key: a pure function of (seed, purpose, agent, step),
/// so draws never depend on evaluation order.
constexpr std::uint64_t stream_key(std::uint64_t master_seed, StreamPurpose purpose,
                                   std::uint64_t agent, std::uint64_t step) noexcept {
  std::uint64_t k = mix64(master_seed);
  k = mix64(k ^ static_cast<std::uint64_t>(purpose));
  k = mix64(k ^ (agent + 0x632be59bd9b4e019ULL));
  k = mix64(k ^ (step + 0x8cb92ba72f3d8dd7ULL));
  return k;
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t master_seed, StreamPurpose purpose, std::uint64_t agent,
                       std::uint64_t step) {
  return Rng(stream_key(master_seed, purpose, agent, step));
}

}  // namespace fpnet
