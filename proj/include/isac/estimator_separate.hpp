// SPDX-License-Identifier: Apache-2.0
//
// Successive (baseline) estimator: angle from one spatial snapshot, then range
// from the first OFDM symbol at each estimated angle, then velocity across
// symbols at each estimated (angle, range). Errors in an early stage carry
// into the later ones.

#ifndef ISAC_ESTIMATOR_SEPARATE_HPP
#define ISAC_ESTIMATOR_SEPARATE_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <vector>

#include "isac/core.hpp"
#include "isac/estimator_joint.hpp"
#include "isac/fft.hpp"
#include "isac/txgen.hpp"

namespace isac {

/// Read-only access to y(m, i, l).
template <class V>
concept EchoView = requires(const V& v, std::size_t m, std::size_t i, std::size_t l) {
    { v(m, i, l) } -> std::convertible_to<cplx>;
    { v.num_rx() } -> std::convertible_to<std::size_t>;
    { v.num_subcarriers() } -> std::convertible_to<std::size_t>;
    { v.num_symbols() } -> std::convertible_to<std::size_t>;
};

struct SeparateOptions {
    /// Angular peaks below this fraction of the strongest one are ignored
    /// (-12 dB, just above the first sidelobe of a uniform aperture).
    double angle_peak_threshold = 0.25;
    double clamp_epsilon = 1e-3;
};

struct AnglePeak {
    std::size_t storage = 0;
    double magnitude = 0.0;
};

namespace detail {

/// Beam output (1/N_r) sum_m y(m, i, l) e^{-j m w~_r(k_a)}.
template <EchoView V>
cplx beam_sample(const V& view, std::size_t i, std::size_t l, std::span<const cplx> kernel) {
    cplx acc{};
    for (std::size_t m = 0; m < kernel.size(); ++m) acc += cplx(view(m, i, l)) * kernel[m];
    return acc / static_cast<double>(kernel.size());
}

inline std::vector<cplx> beam_kernel(std::size_t ka, std::size_t nr, std::size_t na) {
    std::vector<cplx> k(nr);
    const double w = bin_frequency(centered_bin(ka, na), na);
    for (std::size_t m = 0; m < nr; ++m) k[m] = std::polar(1.0, -static_cast<double>(m) * w);
    return k;
}

/// Division guard shared with the joint estimator: coefficients below
/// eps * mean|c| are lifted to that floor.
inline std::size_t clamp_coefficients(std::vector<cplx>& c, double eps) {
    double mean = 0.0;
    for (const auto& g : c) mean += std::abs(g);
    mean /= static_cast<double>(std::max<std::size_t>(c.size(), 1));
    std::size_t clamped = 0;
    for (auto& g : c) {
        const double mag = std::abs(g);
        if (mean == 0.0) {
            g = 1.0;
            ++clamped;
        } else if (mag < eps * mean) {
            g = mag > 0.0 ? g * (eps * mean / mag) : cplx(eps * mean, 0.0);
            ++clamped;
        }
    }
    return clamped;
}

/// Index of the largest magnitude; ties go to the smallest signed bin.
template <class BinOf>
std::size_t argmax_bin(std::span<const cplx> v, BinOf bin_of) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k) {
        const double a = std::norm(v[k]), b = std::norm(v[best]);
        if (a > b || (a == b && bin_of(k) < bin_of(best))) best = k;
    }
    return best;
}

}  // namespace detail

/// Stage 1: N_a-point spectrum of the (i = 0, l = 0) snapshot; local maxima
/// (circular) above the relative threshold, greedy with a one-cell exclusion.
template <EchoView V>
std::vector<AnglePeak> separate_angle_stage(const V& view, const SystemConfig& cfg, std::size_t count,
                                            const SeparateOptions& opt = {}) {
    const std::size_t nr = view.num_rx(), na = cfg.fft_angle;
    std::vector<cplx> snap(nr);
    for (std::size_t m = 0; m < nr; ++m) snap[m] = view(m, 0, 0);
    auto spec = fft::dft(snap, na);
    std::vector<double> mag(na);
    for (std::size_t k = 0; k < na; ++k) mag[k] = std::abs(spec[k]) / static_cast<double>(nr);

    const double top = *std::max_element(mag.begin(), mag.end());
    std::vector<AnglePeak> candidates;
    if (top <= 0.0 || count == 0) return {};
    for (std::size_t k = 0; k < na; ++k) {
        const double left = mag[(k + na - 1) % na], right = mag[(k + 1) % na];
        if (mag[k] >= left && mag[k] >= right && mag[k] >= opt.angle_peak_threshold * top)
            candidates.push_back({k, mag[k]});
    }
    std::sort(candidates.begin(), candidates.end(), [na](const AnglePeak& a, const AnglePeak& b) {
        if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
        return centered_bin(a.storage, na) < centered_bin(b.storage, na);
    });
    const double exclusion = static_cast<double>(na) / static_cast<double>(nr);
    std::vector<AnglePeak> accepted;
    for (const auto& c : candidates) {
        if (accepted.size() == count) break;
        bool near = false;
        for (const auto& a : accepted)
            if (static_cast<double>(detail::circular_distance(a.storage, c.storage, na)) < exclusion) near = true;
        if (!near) accepted.push_back(c);
    }
    return accepted;
}

/// Stage 2: first-symbol subcarrier sequence at the estimated angle, divided by
/// a^H((-d_t/d_r) w~_r) x_i[0], N_d-point transform; returns delay storage index.
template <EchoView V>
std::size_t separate_range_stage(const V& view, const TxSignal& tx, const SystemConfig& cfg,
                                 std::size_t angle_storage, const SeparateOptions& opt = {},
                                 std::size_t* clamp_count = nullptr) {
    const std::size_t ns = view.num_subcarriers(), nd = cfg.fft_delay;
    const auto kernel = detail::beam_kernel(angle_storage, view.num_rx(), cfg.fft_angle);
    const double wt = bin_tx_frequency(angle_storage, cfg.fft_angle, cfg);
    std::vector<cplx> coeff(ns);
    for (std::size_t i = 0; i < ns; ++i) coeff[i] = steering_inner(wt, tx.column(i, 0));
    const std::size_t clamped = detail::clamp_coefficients(coeff, opt.clamp_epsilon);
    if (clamp_count) *clamp_count += clamped;

    std::vector<cplx> seq(nd);
    for (std::size_t i = 0; i < ns; ++i) seq[i] = detail::beam_sample(view, i, 0, kernel) / coeff[i];
    fft::transform(seq.data(), nd, 1, 1, nd, fft::Sign::backward);
    return detail::argmax_bin(std::span<const cplx>(seq), [](std::size_t k) { return delay_bin(k); });
}

/// Stage 3: per symbol, the divided beam output evaluated at the estimated
/// delay bin, then an N_v-point transform across symbols. Returns the Doppler
/// storage index and the peak magnitude (normalized by N_s L).
template <EchoView V>
std::pair<std::size_t, double> separate_velocity_stage(const V& view, const TxSignal& tx,
                                                       const SystemConfig& cfg, std::size_t angle_storage,
                                                       std::size_t delay_storage_index,
                                                       const SeparateOptions& opt = {},
                                                       std::size_t* clamp_count = nullptr) {
    const std::size_t ns = view.num_subcarriers(), len = view.num_symbols(), nv = cfg.fft_doppler;
    const auto kernel = detail::beam_kernel(angle_storage, view.num_rx(), cfg.fft_angle);
    const double wt = bin_tx_frequency(angle_storage, cfg.fft_angle, cfg);
    std::vector<cplx> delay_kernel(ns);
    for (std::size_t i = 0; i < ns; ++i)
        delay_kernel[i] = std::polar(1.0, kTwoPi * static_cast<double>(i * delay_storage_index % cfg.fft_delay) /
                                              static_cast<double>(cfg.fft_delay));

    std::vector<cplx> seq(nv), coeff(ns);
    for (std::size_t l = 0; l < len; ++l) {
        for (std::size_t i = 0; i < ns; ++i) coeff[i] = steering_inner(wt, tx.column(i, l));
        const std::size_t clamped = detail::clamp_coefficients(coeff, opt.clamp_epsilon);
        if (clamp_count) *clamp_count += clamped;
        cplx acc{};
        for (std::size_t i = 0; i < ns; ++i)
            acc += detail::beam_sample(view, i, l, kernel) / coeff[i] * delay_kernel[i];
        seq[l] = acc / static_cast<double>(ns * len);
    }
    fft::transform(seq.data(), nv, 1, 1, nv, fft::Sign::forward);
    const std::size_t best =
        detail::argmax_bin(std::span<const cplx>(seq), [nv](std::size_t k) { return centered_bin(k, nv); });
    return {best, std::abs(seq[best])};
}

template <EchoView V>
EstimateSet estimate_separate(const V& view, const TxSignal& tx, const SystemConfig& cfg, std::size_t count,
                              const SeparateOptions& opt = {}) {
    if (view.num_rx() != cfg.num_rx || view.num_subcarriers() != cfg.num_subcarriers ||
        view.num_symbols() != cfg.num_symbols)
        throw Error("estimate_separate: echo cube does not match the configuration");
    if (tx.num_tx() != cfg.num_tx || tx.num_subcarriers() != cfg.num_subcarriers ||
        tx.num_symbols() != cfg.num_symbols)
        throw Error("estimate_separate: transmit tensor does not match the configuration");

    EstimateSet out;
    out.requested = count;
    if (count == 0) return out;
    const auto angles = separate_angle_stage(view, cfg, count, opt);
    out.short_of_peaks = angles.size() < count;
    for (const auto& peak : angles) {
        const std::size_t kd = separate_range_stage(view, tx, cfg, peak.storage, opt, &out.clamp_count);
        const auto [kv, mag] = separate_velocity_stage(view, tx, cfg, peak.storage, kd, opt, &out.clamp_count);
        Estimate e;
        e.bin = {centered_bin(peak.storage, cfg.fft_angle), delay_bin(kd), centered_bin(kv, cfg.fft_doppler)};
        e.theta = bin_angle(e.bin.angle, cfg, &e.ambiguous);
        e.range = bin_range(e.bin.delay, cfg);
        e.velocity = bin_velocity(e.bin.doppler, cfg);
        e.magnitude = mag;
        out.items.push_back(e);
    }
    return out;
}

}  // namespace isac

#endif  // ISAC_ESTIMATOR_SEPARATE_HPP
