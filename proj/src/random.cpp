#include "pergo/random.hpp"

namespace pergo {

std::uint64_t
mix64(std::uint64_t z) noexcept
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng
make_stream(std::uint64_t seed, std::uint64_t index)
{
  // two rounds so that neighbouring (seed, index) pairs land far apart
  return Rng(mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL)));
}

} // namespace pergo
