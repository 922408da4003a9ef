// SPDX-License-Identifier: Apache-2.0

#ifndef ISAC_ECHO_SIM_HPP
#define ISAC_ECHO_SIM_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "isac/core.hpp"
#include "isac/rng.hpp"
#include "isac/txgen.hpp"

namespace isac {

/// i.i.d. CN(0, sigma_beta_sq) reflection coefficients, one per target.
inline std::vector<cplx> reflection_coefficients(std::size_t count, double sigma_beta_sq,
                                                 std::uint64_t seed) {
    Rng rng(seed);
    std::vector<cplx> beta(count);
    for (auto& b : beta) b = rng.complex_normal(sigma_beta_sq);
    return beta;
}

/// Frequency-domain echo cube
///   y(m,i,l) = sum_q beta_q sqrt(PL(2 d_q)) a^H(omega_t(theta_q)) x_i[l]
///              e^{j m omega_r} e^{j i omega_d} e^{j l omega_v} + z(m,i,l)
/// with z ~ CN(0, sigma_s^2) drawn from `noise_seed` when `noise_on`.
inline EchoCube simulate_echo_cube(const SystemConfig& cfg, std::span<const Target> targets,
                                   const TxSignal& tx, bool noise_on, std::uint64_t noise_seed) {
    const std::size_t nr = cfg.num_rx, ns = cfg.num_subcarriers, len = cfg.num_symbols;
    if (tx.num_tx() != cfg.num_tx || tx.num_subcarriers() != ns || tx.num_symbols() != len)
        throw Error("simulate_echo_cube: transmit tensor shape does not match the configuration");

    EchoCube cube{CTensor(nr, ns, len)};
    std::vector<cplx> coeff(ns * len), ramp_m(nr), ramp_i(ns), ramp_l(len);
    std::vector<cplx> xcol(cfg.num_tx);

    for (const auto& t : targets) {
        const double wt = omega_t(t.theta, cfg), wr = omega_r(t.theta, cfg);
        const double wd = omega_d(t.range, cfg), wv = omega_v(t.velocity, cfg);
        const cplx amp = t.beta * std::sqrt(path_loss(2.0 * t.range, cfg));
        for (std::size_t m = 0; m < nr; ++m) ramp_m[m] = std::polar(1.0, static_cast<double>(m) * wr);
        for (std::size_t i = 0; i < ns; ++i) ramp_i[i] = std::polar(1.0, static_cast<double>(i) * wd);
        for (std::size_t l = 0; l < len; ++l) ramp_l[l] = std::polar(1.0, static_cast<double>(l) * wv);

        const auto a = steering_vector(wt, cfg.num_tx);
        for (std::size_t i = 0; i < ns; ++i)
            for (std::size_t l = 0; l < len; ++l) {
                cplx g{};
                for (std::size_t n = 0; n < cfg.num_tx; ++n) g += std::conj(a[n]) * tx.x(n, i, l);
                coeff[i * len + l] = amp * g * ramp_i[i] * ramp_l[l];
            }
        for (std::size_t m = 0; m < nr; ++m)
            for (std::size_t i = 0; i < ns; ++i)
                for (std::size_t l = 0; l < len; ++l) cube.data(m, i, l) += coeff[i * len + l] * ramp_m[m];
    }

    if (noise_on) {
        Rng rng(noise_seed);
        for (auto& v : cube.data.flat()) v += rng.complex_normal(cfg.sense_noise_power);
    }
    return cube;
}

}  // namespace isac

#endif  // ISAC_ECHO_SIM_HPP
