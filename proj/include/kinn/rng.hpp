#ifndef KINN_RNG_HPP
#define KINN_RNG_HPP

#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace kinn {

/// splitmix64 mixing step. Used for seed derivation and stateless draws.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Map 64 random bits to a double in [0, 1).
inline double bits_to_unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/**
 * Deterministic random source. Wraps mt19937_64 but performs all
 * floating-point conversion itself, so identical seeds give identical
 * streams on every platform (std::*_distribution makes no such promise).
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent child stream; `tag` distinguishes siblings of one seed.
    static Rng derive(std::uint64_t seed, std::uint64_t tag) {
        return Rng(splitmix64(seed ^ splitmix64(tag)));
    }

    std::uint64_t next_bits() { return engine_(); }

    /// Uniform in [0, 1).
    double next_unit() { return bits_to_unit_double(engine_()); }

    /// Uniform in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    /// Standard normal via Box-Muller (pairs cached).
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    /// Integer in [0, n). n must be > 0.
    std::size_t next_index(std::size_t n) {
        // Rejection-free modulo bias is negligible for n << 2^64; keep exact
        // anyway since index draws drive shuffles that must be reproducible.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t bits = engine_();
        while (bits >= limit) bits = engine_();
        return static_cast<std::size_t>(bits % n);
    }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// One uniform draw in [-amplitude, amplitude], a pure function of
/// (seed, key). Used where a prediction must depend only on its inputs.
inline double stateless_uniform_offset(std::uint64_t seed, std::uint64_t key,
                                       double amplitude) {
    const std::uint64_t bits = splitmix64(splitmix64(seed) ^ key);
    return (2.0 * bits_to_unit_double(bits) - 1.0) * amplitude;
}

} // namespace kinn

#endif // KINN_RNG_HPP
