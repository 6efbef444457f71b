#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tailrisk {

/// SplitMix64 finalizer (Steele, Lea & Flood 2014). Full-avalanche 64-bit mix.
inline std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed plus up to two
/// indices (e.g. experiment cell and replication). Streams are a pure
/// function of the inputs, so results do not depend on execution order or
/// thread count.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a,
                                   std::uint64_t b = 0) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (a + 0x9E3779B97F4A7C15ULL));
    h = splitmix64(h ^ (b + 0xD1B54A32D192ED03ULL));
    return h;
}

/// Seedable 64-bit generator (mt19937_64) with hand-rolled distributions so
/// that every draw is bit-reproducible for a fixed seed. Standard-library
/// distribution objects are implementation-defined and are deliberately not
/// used.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform draw in (0, 1]; never returns 0, safe under log() and
    /// negative-power transforms.
    double uniform() {
        return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    /// Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape > 0.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace tailrisk
