// SPDX-License-Identifier: Apache-2.0
//
// Joint angle-range-velocity estimation over the whole echo cube:
//   1. normalized N_a-point DFT along the receive antennas,
//   2. per angular bin, divide out the known signal-dependent coefficient
//      a^H((-d_t/d_r) w_r(n_a)) x_i[l], scaled so the bin keeps its power,
//   3. normalized (N_d, N_v)-point 2-D DFT along subcarriers and symbols,
//   4. pick the Q strongest 3-D peaks and map bins to (theta, d, v).

#ifndef ISAC_ESTIMATOR_JOINT_HPP
#define ISAC_ESTIMATOR_JOINT_HPP

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <vector>

#include "isac/core.hpp"
#include "isac/fft.hpp"
#include "isac/txgen.hpp"

namespace isac {

/// Y_{i,l}(n_a), stored as (k_a, i, l) with k_a in centered storage order.
struct AngularSpectrum {
    CTensor data;  // N_a x N_s x L

    std::size_t fft_angle() const { return data.extent(0); }
};

struct ScalingFactors {
    std::vector<double> alpha;  // one per angular bin, storage order
};

/// a^H((-d_t/d_r) w~_r(n_a)) x_i[l] per angular bin, after clamping.
struct BinCoefficients {
    CTensor data;  // N_a x N_s x L
    std::size_t clamp_count = 0;
};

inline AngularSpectrum spatial_dft(const EchoCube& cube, std::size_t fft_angle) {
    const std::size_t nr = cube.num_rx(), ns = cube.num_subcarriers(), len = cube.num_symbols();
    if (fft_angle < nr) throw Error("spatial_dft: N_a must be >= N_r");
    AngularSpectrum out{CTensor(fft_angle, ns, len)};
    const std::size_t plane = ns * len;
    std::copy(cube.data.data(), cube.data.data() + nr * plane, out.data.data());
    fft::transform(out.data.data(), fft_angle, plane, plane, 1, fft::Sign::forward);
    const double scale = 1.0 / static_cast<double>(nr);
    for (auto& v : out.data.flat()) v *= scale;
    return out;
}

/// Transmit spatial frequency assumed for angular bin k_a.
inline double bin_tx_frequency(std::size_t ka, std::size_t fft_angle, const SystemConfig& cfg) {
    return -(cfg.tx_spacing / cfg.rx_spacing) * bin_frequency(centered_bin(ka, fft_angle), fft_angle);
}

/// Coefficients with magnitude below clamp_epsilon * (bin mean magnitude) are
/// lifted to that floor, phase kept. A bin whose coefficients are all zero is
/// replaced by ones (nothing was transmitted toward it).
inline BinCoefficients bin_coefficients(const TxSignal& tx, const SystemConfig& cfg,
                                        double clamp_epsilon = 1e-3) {
    const std::size_t na = cfg.fft_angle, ns = tx.num_subcarriers(), len = tx.num_symbols();
    const std::size_t nt = tx.num_tx();
    BinCoefficients out{CTensor(na, ns, len)};
    std::vector<cplx> conj_a(nt);
    for (std::size_t ka = 0; ka < na; ++ka) {
        const auto a = steering_vector(bin_tx_frequency(ka, na, cfg), nt);
        for (std::size_t n = 0; n < nt; ++n) conj_a[n] = std::conj(a[n]);
        double mean = 0.0;
        for (std::size_t i = 0; i < ns; ++i)
            for (std::size_t l = 0; l < len; ++l) {
                cplx g{};
                for (std::size_t n = 0; n < nt; ++n) g += conj_a[n] * tx.x(n, i, l);
                out.data(ka, i, l) = g;
                mean += std::abs(g);
            }
        mean /= static_cast<double>(ns * len);
        const double floor = clamp_epsilon * mean;
        for (std::size_t i = 0; i < ns; ++i)
            for (std::size_t l = 0; l < len; ++l) {
                cplx& g = out.data(ka, i, l);
                const double mag = std::abs(g);
                if (mean == 0.0) {
                    g = 1.0;
                    ++out.clamp_count;
                } else if (mag < floor) {
                    g = mag > 0.0 ? g * (floor / mag) : cplx(floor, 0.0);
                    ++out.clamp_count;
                }
            }
    }
    return out;
}

/// alpha_{n_a} = sqrt( sum |Y / c|^2 / sum |Y|^2 ), 1 for an all-zero bin.
inline ScalingFactors scaling_factors(const AngularSpectrum& spectrum, const BinCoefficients& coeff) {
    const std::size_t na = spectrum.fft_angle();
    const std::size_t plane = spectrum.data.extent(1) * spectrum.data.extent(2);
    if (coeff.data.dims() != spectrum.data.dims())
        throw Error("scaling_factors: coefficient table does not match the spectrum");
    ScalingFactors out{std::vector<double>(na, 1.0)};
    for (std::size_t ka = 0; ka < na; ++ka) {
        const cplx* y = spectrum.data.data() + ka * plane;
        const cplx* c = coeff.data.data() + ka * plane;
        double num = 0.0, den = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
            num += std::norm(y[p] / c[p]);
            den += std::norm(y[p]);
        }
        if (den > 0.0) out.alpha[ka] = std::sqrt(num / den);
    }
    return out;
}

inline ScalingFactors scaling_factors(const AngularSpectrum& spectrum, const TxSignal& tx,
                                      const SystemConfig& cfg) {
    return scaling_factors(spectrum, bin_coefficients(tx, cfg));
}

/// Unit factors: coefficient division without power preservation.
inline ScalingFactors unit_scaling(std::size_t fft_angle) {
    return ScalingFactors{std::vector<double>(fft_angle, 1.0)};
}

/// y_{i,l}(n_a) = Y_{i,l}(n_a) / (alpha_{n_a} c_{n_a}(i, l))
inline CTensor remove_coefficients(const AngularSpectrum& spectrum, const BinCoefficients& coeff,
                                   const ScalingFactors& alpha) {
    const std::size_t na = spectrum.fft_angle();
    if (coeff.data.dims() != spectrum.data.dims() || alpha.alpha.size() != na)
        throw Error("remove_coefficients: shape mismatch");
    const std::size_t plane = spectrum.data.extent(1) * spectrum.data.extent(2);
    CTensor out(spectrum.data.extent(0), spectrum.data.extent(1), spectrum.data.extent(2));
    for (std::size_t ka = 0; ka < na; ++ka) {
        const cplx* y = spectrum.data.data() + ka * plane;
        const cplx* c = coeff.data.data() + ka * plane;
        cplx* o = out.data() + ka * plane;
        const double a = alpha.alpha[ka];
        for (std::size_t p = 0; p < plane; ++p) o[p] = y[p] / (a * c[p]);
    }
    return out;
}

inline CTensor remove_coefficients(const AngularSpectrum& spectrum, const TxSignal& tx,
                                   const ScalingFactors& alpha, const SystemConfig& cfg) {
    return remove_coefficients(spectrum, bin_coefficients(tx, cfg), alpha);
}

/// Y(n_a, n_d, n_v) = 1/(N_s L) sum_{i,l} y_{i,l}(n_a) e^{-j l w~_v(n_v)} e^{-j i w~_d(n_d)}
/// for every angular slab of `divided` (N_a x N_s x L). Delay storage k holds
/// n_d = -k, so the delay axis is an unnormalized inverse transform.
inline RadarCube range_doppler_dft(const CTensor& divided, std::size_t fft_delay, std::size_t fft_doppler) {
    const std::size_t na = divided.extent(0), ns = divided.extent(1), len = divided.extent(2);
    if (fft_delay < ns) throw Error("range_doppler_dft: N_d must be >= N_s");
    if (fft_doppler < len) throw Error("range_doppler_dft: N_v must be >= L");
    RadarCube out{CTensor(na, fft_delay, fft_doppler)};
    const double scale = 1.0 / static_cast<double>(ns * len);
    const std::size_t slab = fft_delay * fft_doppler;
    for (std::size_t ka = 0; ka < na; ++ka) {
        cplx* base = out.data.data() + ka * slab;
        for (std::size_t i = 0; i < ns; ++i)
            for (std::size_t l = 0; l < len; ++l) base[i * fft_doppler + l] = divided(ka, i, l) * scale;
        // Rows i >= N_s are zero and stay zero under the Doppler transform.
        fft::transform(base, fft_doppler, ns, 1, fft_doppler, fft::Sign::forward);
        fft::transform(base, fft_delay, fft_doppler, fft_doppler, 1, fft::Sign::backward);
    }
    return out;
}

struct PeakSearch {
    std::vector<BinIndex> peaks;
    std::vector<double> magnitudes;
    bool short_of_peaks = false;
};

namespace detail {

inline std::size_t circular_distance(std::size_t a, std::size_t b, std::size_t n) {
    const std::size_t d = a > b ? a - b : b - a;
    return std::min(d, n - d);
}

}  // namespace detail

/// Local maxima of |Y| over the 26-neighborhood (angle and Doppler wrap, delay
/// does not), accepted greedily by descending magnitude. A candidate is
/// rejected when it lies within one resolution cell (N_a/N_r, N_d/N_s, N_v/L
/// bins) of an accepted peak along all three axes. Equal magnitudes resolve
/// to the lexicographically smallest signed (n_a, n_d, n_v).
inline PeakSearch find_peaks(const RadarCube& cube, std::size_t count, const SystemConfig& cfg) {
    PeakSearch out;
    if (count == 0) return out;
    const std::size_t na = cube.fft_angle(), nd = cube.fft_delay(), nv = cube.fft_doppler();
    const CTensor& y = cube.data;

    struct Candidate {
        double power;
        BinIndex bin;
        std::size_t ka, kd, kv;
    };
    std::vector<Candidate> candidates;

    for (std::size_t ka = 0; ka < na; ++ka) {
        const std::size_t a_prev = (ka + na - 1) % na, a_next = (ka + 1) % na;
        const std::size_t arows[3] = {a_prev, ka, a_next};
        for (std::size_t kd = 0; kd < nd; ++kd) {
            for (std::size_t kv = 0; kv < nv; ++kv) {
                const double p = std::norm(y(ka, kd, kv));
                if (!(p > 0.0)) continue;
                const std::size_t v_prev = (kv + nv - 1) % nv, v_next = (kv + 1) % nv;
                const std::size_t vcols[3] = {v_prev, kv, v_next};
                bool is_max = true;
                for (int da = 0; da < 3 && is_max; ++da) {
                    for (int dd = -1; dd <= 1 && is_max; ++dd) {
                        const long kdn = static_cast<long>(kd) + dd;
                        if (kdn < 0 || kdn >= static_cast<long>(nd)) continue;
                        for (int dv = 0; dv < 3; ++dv) {
                            if (da == 1 && dd == 0 && dv == 1) continue;
                            if (std::norm(y(arows[da], static_cast<std::size_t>(kdn), vcols[dv])) > p) {
                                is_max = false;
                                break;
                            }
                        }
                    }
                }
                if (is_max) candidates.push_back({p, cube.bin_of(ka, kd, kv), ka, kd, kv});
            }
        }
    }

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.power != b.power) return a.power > b.power;
        return a.bin < b.bin;
    });

    const double ex_a = static_cast<double>(na) / static_cast<double>(cfg.num_rx);
    const double ex_d = static_cast<double>(nd) / static_cast<double>(cfg.num_subcarriers);
    const double ex_v = static_cast<double>(nv) / static_cast<double>(cfg.num_symbols);
    std::vector<const Candidate*> accepted;
    for (const auto& c : candidates) {
        if (accepted.size() == count) break;
        bool excluded = false;
        for (const Candidate* p : accepted) {
            const double da = static_cast<double>(detail::circular_distance(c.ka, p->ka, na));
            const double dd = std::abs(static_cast<double>(c.kd) - static_cast<double>(p->kd));
            const double dv = static_cast<double>(detail::circular_distance(c.kv, p->kv, nv));
            if (da < ex_a && dd < ex_d && dv < ex_v) {
                excluded = true;
                break;
            }
        }
        if (!excluded) accepted.push_back(&c);
    }
    for (const Candidate* c : accepted) {
        out.peaks.push_back(c->bin);
        out.magnitudes.push_back(std::sqrt(c->power));
    }
    out.short_of_peaks = out.peaks.size() < count;
    return out;
}

/// Angle of a signed angular bin; flags bins outside the arcsin domain and
/// clamps them to +-pi/2.
inline double bin_angle(long angle_bin, const SystemConfig& cfg, bool* ambiguous = nullptr) {
    const double s = -static_cast<double>(angle_bin) * cfg.wavelength() /
                     (cfg.rx_spacing * static_cast<double>(cfg.fft_angle));
    if (ambiguous) *ambiguous = std::abs(s) > 1.0;
    return std::asin(std::clamp(s, -1.0, 1.0));
}

inline double bin_range(long delay_bin_index, const SystemConfig& cfg) {
    return -cfg.speed_of_light * static_cast<double>(delay_bin_index) /
           (2.0 * static_cast<double>(cfg.fft_delay) * cfg.subcarrier_spacing);
}

inline double bin_velocity(long doppler_bin_index, const SystemConfig& cfg) {
    return cfg.speed_of_light * static_cast<double>(doppler_bin_index) /
           (2.0 * static_cast<double>(cfg.fft_doppler) * cfg.total_symbol_duration() * cfg.carrier_freq);
}

inline EstimateSet recover_params(std::span<const BinIndex> bins, const SystemConfig& cfg,
                                  std::span<const double> magnitudes = {}) {
    EstimateSet out;
    out.requested = bins.size();
    for (std::size_t q = 0; q < bins.size(); ++q) {
        const auto& b = bins[q];
        if (b.delay > 0 || -b.delay >= static_cast<long>(cfg.fft_delay))
            throw Error("recover_params: delay bin out of range");
        Estimate e;
        e.bin = b;
        e.theta = bin_angle(b.angle, cfg, &e.ambiguous);
        e.range = bin_range(b.delay, cfg);
        e.velocity = bin_velocity(b.doppler, cfg);
        e.magnitude = q < magnitudes.size() ? magnitudes[q] : 0.0;
        out.items.push_back(e);
    }
    return out;
}

struct JointOptions {
    bool use_scaling = true;       // false: alpha forced to 1
    double clamp_epsilon = 1e-3;
};

struct JointResult {
    EstimateSet estimates;
    RadarCube cube;
    ScalingFactors alpha;
};

inline JointResult estimate_joint(const EchoCube& echo, const TxSignal& tx, const SystemConfig& cfg,
                                  std::size_t count, const JointOptions& options = {}) {
    if (!echo.matches(cfg)) throw Error("estimate_joint: echo cube does not match the configuration");
    if (tx.num_tx() != cfg.num_tx || tx.num_subcarriers() != cfg.num_subcarriers ||
        tx.num_symbols() != cfg.num_symbols)
        throw Error("estimate_joint: transmit tensor does not match the configuration");

    JointResult result;
    BinCoefficients coeff = bin_coefficients(tx, cfg, options.clamp_epsilon);
    AngularSpectrum spectrum = spatial_dft(echo, cfg.fft_angle);
    result.alpha = options.use_scaling ? scaling_factors(spectrum, coeff) : unit_scaling(cfg.fft_angle);
    CTensor divided = remove_coefficients(spectrum, coeff, result.alpha);
    spectrum = {};
    result.cube = range_doppler_dft(divided, cfg.fft_delay, cfg.fft_doppler);
    divided = {};

    const PeakSearch peaks = find_peaks(result.cube, count, cfg);
    result.estimates = recover_params(peaks.peaks, cfg, peaks.magnitudes);
    result.estimates.requested = count;
    result.estimates.short_of_peaks = peaks.short_of_peaks;
    result.estimates.clamp_count = coeff.clamp_count;
    return result;
}

}  // namespace isac

#endif  // ISAC_ESTIMATOR_JOINT_HPP
