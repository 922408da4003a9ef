// SPDX-License-Identifier: Apache-2.0

#ifndef ISAC_RNG_HPP
#define ISAC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "isac/core.hpp"

namespace isac {

/// Purpose tags for seed derivation. Each random quantity of a trial draws from
/// its own stream, so e.g. adding a target never shifts the noise samples.
enum class SeedPurpose : std::uint64_t {
    scene = 1,
    reflection = 2,
    symbols = 3,
    channel = 4,
    noise = 5,
    comm_noise = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Folds a path of integers into one seed: h = splitmix64(h ^ splitmix64(part)).
/// derive_seed(master, {sweep_index, trial_index, purpose}) is the per-trial
/// stream used by the harness.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(master);
    for (auto part : path) h = splitmix64(h ^ splitmix64(part));
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t sweep, std::uint64_t trial,
                                 SeedPurpose purpose) {
    return derive_seed(master, {sweep, trial, static_cast<std::uint64_t>(purpose)});
}

/// mt19937_64 with hand-rolled uniform/normal transforms; the standard
/// distributions are implementation-defined and would break byte-level
/// reproducibility across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do r = engine_();
        while (r >= limit);
        return r % n;
    }

    /// Standard normal (Box-Muller, both outputs used).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do u1 = uniform();
        while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(kTwoPi * u2);
        has_spare_ = true;
        return r * std::cos(kTwoPi * u2);
    }

    /// Circular complex Gaussian CN(0, variance).
    cplx complex_normal(double variance) {
        const double s = std::sqrt(variance / 2.0);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace isac

#endif  // ISAC_RNG_HPP
