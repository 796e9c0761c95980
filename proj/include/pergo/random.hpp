#pragma once

#include <cstdint>
#include <random>

namespace pergo {

using Rng = std::mt19937_64;

//! SplitMix64 finalizer; a bijective 64-bit mix.
std::uint64_t mix64(std::uint64_t z) noexcept;

//! Independent engine for stream `index` under a master `seed`.
//! The result depends only on (seed, index), never on scheduling.
Rng make_stream(std::uint64_t seed, std::uint64_t index);

} // namespace pergo
