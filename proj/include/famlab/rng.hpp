#pragma once

#include <cstdint>
#include <random>

namespace famlab::rng {

/// Engine for stream `index` of a seeded experiment. Streams are independent
/// of the order in which they are consumed.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index);

/// Uniform integer in [0, bound) by rejection; identical on every platform,
/// unlike std::uniform_int_distribution.
std::uint64_t uniform_index(std::mt19937_64& engine, std::uint64_t bound);

/// Uniform double in [0, 1) from the top 53 bits.
double uniform_unit(std::mt19937_64& engine);

/// Standard normal variate (Box-Muller, one value per call).
double standard_normal(std::mt19937_64& engine);

}  // namespace famlab::rng
