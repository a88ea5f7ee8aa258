#pragma once

#include <cstdint>
#include <random>

namespace pointer {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t z)
{
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed of stream `index` under master seed `master`: splitmix64(master ^ splitmix64(index)).
/// Trajectory i of a run always uses stream i, independent of worker count.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index)
{
  return splitmix64(master ^ splitmix64(index));
}

/// Stream reserved for set-up draws (initial coefficients etc.), disjoint from trajectory indices.
inline constexpr std::uint64_t setup_stream = ~std::uint64_t{0};

inline Engine make_engine(std::uint64_t master, std::uint64_t index)
{
  return Engine(stream_seed(master, index));
}

template <typename Engine_>
double uniform01(Engine_ &rng)
{
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

} // namespace pointer
