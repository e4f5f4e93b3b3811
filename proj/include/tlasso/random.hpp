#pragma once

#include <cstdint>
#include <random>

namespace tlasso {

using Rng = std::mt19937_64;

// Uniform on the open interval (0, 1) built from the top 53 bits of one
// engine output. Independent of the standard library's distribution code,
// so streams are identical across toolchains.
inline double uniform_open01(Rng& rng) {
  const std::uint64_t bits = rng() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

// splitmix64 finalizer; used to derive independent sub-stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace tlasso
