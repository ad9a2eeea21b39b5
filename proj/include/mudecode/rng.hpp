#pragma once

// Seeding helpers. Every stochastic element in the pipeline derives its stream
// from an explicit 64-bit seed plus a tuple of indices, so results do not
// depend on evaluation order or thread count.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace mudecode::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Order-sensitive mix of a seed with a list of indices.
constexpr std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (auto k : keys) {
        h = splitmix64(h ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
    }
    return h;
}

// Uniform in the open interval (0, 1) from 53 random bits.
constexpr double to_unit_open(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal deviate that is a pure function of (seed, keys...).
inline double counter_normal(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
    const std::uint64_t h = derive(seed, keys);
    const double u1 = to_unit_open(h);
    const double u2 = to_unit_open(splitmix64(h));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
    return Engine{derive(seed, keys)};
}

// U(0,1) from an engine; std::uniform_real_distribution output is not pinned
// across standard libraries, this is.
inline double uniform01(Engine& eng) { return to_unit_open(eng()); }

inline double normal(Engine& eng) {
    const double u1 = uniform01(eng);
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace mudecode::rng
