#ifndef JLGCN_RNG_HPP
#define JLGCN_RNG_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace jlgcn {

/// Seeded random stream with a platform-stable output sequence.
///
/// The engine is std::mt19937_64, whose raw output is fixed by the standard.
/// All derived draws (uniform reals, integers, normals, shuffles) are computed
/// here rather than through <random> distributions, whose algorithms differ
/// between standard library implementations. The stream position counts raw
/// 64-bit draws so that (seed, position) fully describes the state.
class Rng {
public:
    static constexpr std::string_view algorithm = "mt19937_64";

    explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

    /// Reconstructs a generator that has already produced `position` draws.
    static Rng restore(std::uint64_t seed, std::uint64_t position);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t position() const noexcept { return position_; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller (two draws per sample, no caching).
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Independent child stream; consumes one draw from this stream.
    Rng split();

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
    std::uint64_t position_ = 0;
};

} // namespace jlgcn

#endif // JLGCN_RNG_HPP
