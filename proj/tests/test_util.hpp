#pragma once

#include <cmath>

#include "isac/core.hpp"
#include "isac/rng.hpp"
#include "isac/txgen.hpp"

namespace testutil {

using namespace isac;

/// Target sitting exactly on signed bin (n_a, n_d, n_v) of the padded grid.
inline Target on_grid(const SystemConfig& c, long na, long nd, long nv, cplx beta = {0.3, 0.1}) {
    Target t;
    t.theta = std::asin(-static_cast<double>(na) * c.wavelength() / (c.rx_spacing * static_cast<double>(c.fft_angle)));
    t.range = -c.speed_of_light * static_cast<double>(nd) / (2.0 * static_cast<double>(c.fft_delay) * c.subcarrier_spacing);
    t.velocity = c.speed_of_light * static_cast<double>(nv) /
                 (2.0 * static_cast<double>(c.fft_doppler) * c.total_symbol_duration() * c.carrier_freq);
    t.beta = beta;
    return t;
}

inline CTensor random_tensor(std::size_t a, std::size_t b, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    CTensor t(a, b, c);
    for (auto& v : t.flat()) v = rng.complex_normal(1.0);
    return t;
}

/// ZF + 16-QAM transmit signal with K users and sensing rows toward `dirs`.
inline TxSignal zf_tx(const SystemConfig& c, std::span<const double> dirs, std::uint64_t seed) {
    const auto ch = random_comm_channel(c.num_users, c.num_subcarriers, c.num_tx, seed);
    auto pre = zf_precoder(ch, dirs, c);
    auto s = gen_qam_symbols(pre.num_streams(), c.num_subcarriers, c.num_symbols, c.qam_order, seed + 1);
    return assemble_tx(std::move(pre), std::move(s));
}

/// Single-antenna constant-modulus (QPSK) transmit signal.
inline TxSignal qpsk_single(const SystemConfig& c, std::uint64_t seed) {
    auto s = gen_qam_symbols(1, c.num_subcarriers, c.num_symbols, 4, seed);
    for (auto& v : s.flat()) v *= std::sqrt(c.tx_power);
    return raw_tx(std::move(s));
}

}  // namespace testutil
