#include "famlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace famlab::rng {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq sequence{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(sequence);
}

std::uint64_t uniform_index(std::mt19937_64& engine, std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % bound;
    std::uint64_t draw;
    do {
        draw = engine();
    } while (draw >= limit);
    return draw % bound;
}

double uniform_unit(std::mt19937_64& engine) { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }

double standard_normal(std::mt19937_64& engine) {
    const double u1 = 1.0 - uniform_unit(engine);  // (0, 1]
    const double u2 = uniform_unit(engine);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace famlab::rng
