// SPDX-License-Identifier: Apache-2.0

#ifndef ISAC_ANALYSIS_HPP
#define ISAC_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "isac/core.hpp"
#include "isac/txgen.hpp"

namespace isac {

struct UnambiguousLimits {
    double theta_max = 0.0;     // [rad]
    double range_max = 0.0;     // [m]
    double velocity_max = 0.0;  // [m/s]
};

/// theta_max = arcsin(lambda / 2 d_r) (clamped to pi/2), d_max = c / 2 delta_f,
/// v_max = c / 4 T f_c.
inline UnambiguousLimits max_unambiguous(const SystemConfig& cfg) {
    return {std::asin(std::min(1.0, cfg.wavelength() / (2.0 * cfg.rx_spacing))),
            cfg.speed_of_light / (2.0 * cfg.subcarrier_spacing),
            cfg.speed_of_light / (4.0 * cfg.total_symbol_duration() * cfg.carrier_freq)};
}

/// Un-padded DFT resolutions. The angular width is in the sine domain, so the
/// resolution in radians widens away from broadside. Zero-padding refines the
/// bin grid but not these widths.
struct Resolutions {
    double angle_sin = 0.0;  // lambda / (N_r d_r)
    double range = 0.0;      // c / (2 N_s delta_f)
    double velocity = 0.0;   // c / (2 f_c L T)
};

inline Resolutions resolutions(const SystemConfig& cfg) {
    return {cfg.wavelength() / (static_cast<double>(cfg.num_rx) * cfg.rx_spacing),
            cfg.speed_of_light / (2.0 * static_cast<double>(cfg.num_subcarriers) * cfg.subcarrier_spacing),
            cfg.speed_of_light /
                (2.0 * cfg.carrier_freq * static_cast<double>(cfg.num_symbols) * cfg.total_symbol_duration())};
}

/// |a^H(omega_t(theta)) x_i[l]|^2 for every (i, l), row-major over (i, l).
inline std::vector<double> coefficient_powers(double theta, const TxSignal& tx, const SystemConfig& cfg) {
    const double wt = omega_t(theta, cfg);
    const auto a = steering_vector(wt, tx.num_tx());
    std::vector<double> out(tx.num_subcarriers() * tx.num_symbols());
    for (std::size_t i = 0; i < tx.num_subcarriers(); ++i)
        for (std::size_t l = 0; l < tx.num_symbols(); ++l) {
            cplx g{};
            for (std::size_t n = 0; n < tx.num_tx(); ++n) g += std::conj(a[n]) * tx.x(n, i, l);
            out[i * tx.num_symbols() + l] = std::norm(g);
        }
    return out;
}

/// sigma_beta^2 PL(2d) sum_{i,l} |a^H x_i[l]|^2 / (N_s L sigma_s^2)
inline double received_snr(const SystemConfig& cfg, const Target& target, const TxSignal& tx) {
    const auto g2 = coefficient_powers(target.theta, tx, cfg);
    const double sum = std::accumulate(g2.begin(), g2.end(), 0.0);
    return cfg.beta_power * path_loss(2.0 * target.range, cfg) * sum /
           (static_cast<double>(cfg.num_subcarriers * cfg.num_symbols) * cfg.sense_noise_power);
}

/// N_r N_s^2 L^2 sigma_beta^2 PL(2d) / sum_{i,l} (sigma_s^2 / |a^H x_i[l]|^2).
/// Coefficients below clamp_epsilon * mean|a^H x| use the floor, as the
/// estimator does.
inline double output_snr(const SystemConfig& cfg, const Target& target, const TxSignal& tx,
                         double clamp_epsilon = 1e-3) {
    auto g2 = coefficient_powers(target.theta, tx, cfg);
    double mean = 0.0;
    for (double p : g2) mean += std::sqrt(p);
    mean /= static_cast<double>(g2.size());
    if (mean == 0.0) return 0.0;
    const double floor2 = (clamp_epsilon * mean) * (clamp_epsilon * mean);
    double inv = 0.0;
    for (double p : g2) inv += cfg.sense_noise_power / std::max(p, floor2);
    const double ns = static_cast<double>(cfg.num_subcarriers), len = static_cast<double>(cfg.num_symbols);
    return static_cast<double>(cfg.num_rx) * ns * ns * len * len * cfg.beta_power *
           path_loss(2.0 * target.range, cfg) / inv;
}

/// Peak power over the mean-square of zero-mean noise samples taken at the
/// same bin of noise-only processed cubes.
inline double empirical_output_snr(cplx peak, std::span<const cplx> noise_at_peak) {
    if (noise_at_peak.empty()) throw Error("empirical_output_snr: need at least one noise trial");
    double var = 0.0;
    for (const auto& z : noise_at_peak) var += std::norm(z);
    var /= static_cast<double>(noise_at_peak.size());
    return std::norm(peak) / var;
}

inline double empirical_output_snr(const RadarCube& cube, const BinIndex& peak,
                                   std::span<const cplx> noise_at_peak) {
    return empirical_output_snr(cube.at(peak), noise_at_peak);
}

// ---------------------------------------------------------------------------
// RMSE with estimate-to-truth assignment
// ---------------------------------------------------------------------------

enum class Dimension { angle, range, velocity };

/// Squared error charged per unmatched truth, in each dimension's own unit
/// (rad, m, m/s).
struct ErrorPenalty {
    double angle = 0.0;
    double range = 0.0;
    double velocity = 0.0;
};

/// Per-trial mean (over truths) of squared errors.
struct TrialErrors {
    double angle = 0.0;     // rad^2
    double range = 0.0;     // m^2
    double velocity = 0.0;  // (m/s)^2
    std::size_t missed = 0;
};

namespace detail {

inline void enumerate_injections(const std::vector<std::vector<double>>& cost, std::size_t row,
                                 std::vector<int>& current, std::vector<bool>& used, double acc,
                                 double& best, std::vector<int>& best_assign) {
    if (acc >= best) return;
    if (row == cost.size()) {
        best = acc;
        best_assign = current;
        return;
    }
    for (std::size_t c = 0; c < cost[row].size(); ++c) {
        if (used[c]) continue;
        used[c] = true;
        current[row] = static_cast<int>(c);
        enumerate_injections(cost, row + 1, current, used, acc + cost[row][c], best, best_assign);
        used[c] = false;
    }
    current[row] = -1;
}

/// Exhaustive minimum-cost injection of rows into columns (rows <= cols).
inline std::vector<int> exhaustive_rows(const std::vector<std::vector<double>>& cost) {
    std::vector<int> current(cost.size(), -1), best_assign(cost.size(), -1);
    std::vector<bool> used(cost.empty() ? 0 : cost[0].size(), false);
    double best = std::numeric_limits<double>::infinity();
    enumerate_injections(cost, 0, current, used, 0.0, best, best_assign);
    return best_assign;
}

/// Hungarian algorithm (potentials form) for rows <= cols.
inline std::vector<int> hungarian_rows(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    const std::size_t m = n ? cost[0].size() : 0;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assign(n, -1);
    for (std::size_t j = 1; j <= m; ++j)
        if (p[j]) assign[p[j] - 1] = static_cast<int>(j - 1);
    return assign;
}

}  // namespace detail

/// Minimum-total-cost matching of truths (rows) to estimates (columns).
/// Returns, per truth, the matched estimate index or -1. Exactly
/// min(rows, cols) pairs are formed. Exhaustive up to 6 on the smaller side
/// of the problem, Hungarian beyond.
inline std::vector<int> optimal_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t rows = cost.size();
    const std::size_t cols = rows ? cost[0].size() : 0;
    if (rows == 0) return {};
    if (cols == 0) return std::vector<int>(rows, -1);
    const bool transpose = rows > cols;
    std::vector<std::vector<double>> c = cost;
    if (transpose) {
        c.assign(cols, std::vector<double>(rows));
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < cols; ++k) c[k][r] = cost[r][k];
    }
    const auto small = std::min(rows, cols) <= 6 && std::max(rows, cols) <= 8 ? detail::exhaustive_rows(c)
                                                                               : detail::hungarian_rows(c);
    if (!transpose) return small;
    std::vector<int> out(rows, -1);
    for (std::size_t k = 0; k < small.size(); ++k)
        if (small[k] >= 0) out[static_cast<std::size_t>(small[k])] = static_cast<int>(k);
    return out;
}

/// Matches estimates to truths by minimum total squared error, each dimension
/// normalized by its resolution (sine-domain for angle), and returns the
/// per-dimension mean squared errors. Unmatched truths are charged `penalty`.
inline TrialErrors score_trial(std::span<const Target> truth, const EstimateSet& est, const Resolutions& res,
                               const ErrorPenalty& penalty) {
    if (truth.empty()) throw Error("score_trial: empty truth set");
    std::vector<std::vector<double>> cost(truth.size(), std::vector<double>(est.size()));
    for (std::size_t q = 0; q < truth.size(); ++q)
        for (std::size_t e = 0; e < est.size(); ++e) {
            const auto& t = truth[q];
            const auto& h = est.items[e];
            const double da = (std::sin(t.theta) - std::sin(h.theta)) / res.angle_sin;
            const double dd = (t.range - h.range) / res.range;
            const double dv = (t.velocity - h.velocity) / res.velocity;
            cost[q][e] = da * da + dd * dd + dv * dv;
        }
    const auto assign = optimal_assignment(cost);
    TrialErrors out;
    for (std::size_t q = 0; q < truth.size(); ++q) {
        if (assign[q] < 0) {
            out.angle += penalty.angle * penalty.angle;
            out.range += penalty.range * penalty.range;
            out.velocity += penalty.velocity * penalty.velocity;
            ++out.missed;
            continue;
        }
        const auto& h = est.items[static_cast<std::size_t>(assign[q])];
        out.angle += (truth[q].theta - h.theta) * (truth[q].theta - h.theta);
        out.range += (truth[q].range - h.range) * (truth[q].range - h.range);
        out.velocity += (truth[q].velocity - h.velocity) * (truth[q].velocity - h.velocity);
    }
    const double n = static_cast<double>(truth.size());
    out.angle /= n;
    out.range /= n;
    out.velocity /= n;
    return out;
}

inline double select(const TrialErrors& e, Dimension dim) {
    switch (dim) {
        case Dimension::angle: return e.angle;
        case Dimension::range: return e.range;
        case Dimension::velocity: return e.velocity;
    }
    return 0.0;
}

/// sqrt of the trial-average of per-trial mean squared errors.
inline double rmse(std::span<const TrialErrors> trials, Dimension dim) {
    if (trials.empty()) throw Error("rmse: no trials");
    double acc = 0.0;
    for (const auto& t : trials) acc += select(t, dim);
    return std::sqrt(acc / static_cast<double>(trials.size()));
}

/// Single-trial convenience.
inline double rmse(std::span<const Target> truth, const EstimateSet& est, Dimension dim, const Resolutions& res,
                   const ErrorPenalty& penalty) {
    const TrialErrors e = score_trial(truth, est, res, penalty);
    return std::sqrt(select(e, dim));
}

}  // namespace isac

#endif  // ISAC_ANALYSIS_HPP
