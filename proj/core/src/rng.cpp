#include "jlgcn/rng.hpp"

#include <cmath>
#include <numbers>

namespace jlgcn {

Rng Rng::restore(std::uint64_t seed, std::uint64_t position) {
    Rng rng(seed);
    rng.engine_.discard(position);
    rng.position_ = position;
    return rng;
}

std::uint64_t Rng::next_u64() {
    ++position_;
    return engine_();
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % n);
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % n;
}

double Rng::normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) {
        u1 = 0x1.0p-53;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split() {
    // SplitMix64 finalizer decorrelates child seeds drawn from nearby outputs.
    std::uint64_t z = next_u64() + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
}

} // namespace jlgcn
