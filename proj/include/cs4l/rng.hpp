#pragma once

#include <cstdint>
#include <random>

namespace cs4l {

using Rng = std::mt19937_64;

// Streams that draw randomness during training. Each (seed, stream, index)
// triple maps to an independent generator so any step can be replayed.
enum class Stream : std::uint64_t {
  LabeledOrder = 1,
  UnlabeledOrder = 2,
  Augment = 3,
  Proxy = 4,
  Torch = 5,
  Split = 6,
  Init = 7,
  Colorizer = 8,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream)) + index);
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, stream, index));
}

}  // namespace cs4l
