// SPDX-License-Identifier: Apache-2.0
//
// Shared domain types for the MIMO-OFDM sensing toolkit: system parameters,
// point targets, complex data cubes, digital-frequency maps, steering vectors
// and the signed-bin conventions used by every estimator.

#ifndef ISAC_CORE_HPP
#define ISAC_CORE_HPP

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace isac {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// ---------------------------------------------------------------------------
// SystemConfig
// ---------------------------------------------------------------------------

/// OFDM, array, propagation and noise parameters plus the three DFT sizes.
/// Powers and gains are linear (W or ratio); conversion from dB happens at the
/// config-file boundary.
struct SystemConfig {
    double carrier_freq = 28e9;         // f_c [Hz]
    double subcarrier_spacing = 120e3;  // delta_f [Hz]
    std::size_t num_subcarriers = 512;  // N_s
    double cp_duration = 8.92e-6 - 1.0 / 120e3;  // T_cp [s], makes T = 8.92 us
    std::size_t num_symbols = 256;      // L
    std::size_t num_tx = 16;            // N_t
    std::size_t num_rx = 16;            // N_r
    double tx_spacing = 0.5 * 3e8 / 28e9;  // d_t [m]
    double rx_spacing = 0.5 * 3e8 / 28e9;  // d_r [m]
    double speed_of_light = 3e8;        // c [m/s]
    double ref_loss = 1e-3;             // c_0, -30 dB
    double ref_distance = 1.0;          // d_0 [m]
    double path_loss_exp = 2.8;         // alpha
    double beta_power = 0.1;            // sigma_beta^2, -10 dB
    double comm_noise_power = 1e-9;     // sigma_c^2, -60 dBm
    double sense_noise_power = 1e-9;    // sigma_s^2, -60 dBm
    int qam_order = 16;
    std::size_t fft_angle = 48;         // N_a
    std::size_t fft_delay = 1536;       // N_d
    std::size_t fft_doppler = 768;      // N_v
    std::size_t num_users = 2;          // K
    double tx_power = 1.0;              // P_tx [W]

    double symbol_duration() const { return 1.0 / subcarrier_spacing; }      // T_d
    double total_symbol_duration() const { return symbol_duration() + cp_duration; }  // T
    double wavelength() const { return speed_of_light / carrier_freq; }

    /// Throws isac::Error naming the first violated constraint.
    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw Error(std::string("invalid SystemConfig: ") + what);
        };
        require(carrier_freq > 0 && subcarrier_spacing > 0, "frequencies must be positive");
        require(cp_duration > 0, "T_cp must be positive");
        require(num_subcarriers > 0 && num_symbols > 0 && num_tx > 0 && num_rx > 0,
                "counts must be positive");
        require(tx_spacing > 0 && rx_spacing > 0, "antenna spacings must be positive");
        require(speed_of_light > 0 && ref_loss > 0 && ref_distance > 0 && path_loss_exp > 0,
                "propagation constants must be positive");
        require(beta_power > 0 && comm_noise_power > 0 && sense_noise_power > 0,
                "powers must be positive");
        require(tx_power >= 0, "transmit power must be non-negative");
        require(fft_angle >= num_rx, "N_a must be >= N_r");
        require(fft_delay >= num_subcarriers, "N_d must be >= N_s");
        require(fft_doppler >= num_symbols, "N_v must be >= L");
        require(num_users <= num_tx, "K must be <= N_t for zero-forcing");
        require(qam_order == 4 || qam_order == 16 || qam_order == 64 || qam_order == 256,
                "qam_order must be 4, 16, 64 or 256");
    }

    /// DFT sizes as `factor` times the data dimensions.
    void set_dft_padding(std::size_t factor) {
        fft_angle = factor * num_rx;
        fft_delay = factor * num_subcarriers;
        fft_doppler = factor * num_symbols;
    }

    /// Full-size system settings used in the reference experiments.
    static SystemConfig reference() { return SystemConfig{}; }

    /// Reduced array/OFDM dimensions with every physical constant unchanged.
    static SystemConfig desk_scale() {
        SystemConfig cfg;
        cfg.num_tx = 8;
        cfg.num_rx = 8;
        cfg.num_subcarriers = 64;
        cfg.num_symbols = 32;
        cfg.set_dft_padding(3);
        return cfg;
    }
};

// ---------------------------------------------------------------------------
// Targets and estimates
// ---------------------------------------------------------------------------

struct Target {
    double theta = 0.0;     // [rad]
    double range = 1.0;     // [m]
    double velocity = 0.0;  // [m/s], radial
    cplx beta{1.0, 0.0};    // reflection coefficient
};

/// Signed DFT bin triple (n_a, n_d, n_v).
struct BinIndex {
    long angle = 0;
    long delay = 0;
    long doppler = 0;
    friend bool operator==(const BinIndex&, const BinIndex&) = default;
    friend auto operator<=>(const BinIndex&, const BinIndex&) = default;
};

struct Estimate {
    double theta = 0.0;
    double range = 0.0;
    double velocity = 0.0;
    double magnitude = 0.0;
    BinIndex bin{};
    bool ambiguous = false;  // arcsin argument fell outside [-1, 1]
};

struct EstimateSet {
    std::vector<Estimate> items;
    std::size_t requested = 0;
    bool short_of_peaks = false;  // fewer peaks found than requested
    std::size_t clamp_count = 0;  // coefficient divisions clamped to the floor

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
};

// ---------------------------------------------------------------------------
// Complex tensors
// ---------------------------------------------------------------------------

/// Dense row-major rank-3 tensor.
template <class T>
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t n0, std::size_t n1, std::size_t n2, T fill = T{})
        : dims_{n0, n1, n2}, data_(n0 * n1 * n2, fill) {}

    std::size_t extent(std::size_t axis) const { return dims_[axis]; }
    const std::array<std::size_t, 3>& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }

    std::size_t offset(std::size_t a, std::size_t b, std::size_t c) const {
        return (a * dims_[1] + b) * dims_[2] + c;
    }
    T& operator()(std::size_t a, std::size_t b, std::size_t c) { return data_[offset(a, b, c)]; }
    const T& operator()(std::size_t a, std::size_t b, std::size_t c) const {
        return data_[offset(a, b, c)];
    }

    std::span<T> flat() { return data_; }
    std::span<const T> flat() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    std::array<std::size_t, 3> dims_{0, 0, 0};
    std::vector<T> data_;
};

using CTensor = Tensor3<cplx>;

/// Received echoes y(m, i, l): N_r x N_s x L.
struct EchoCube {
    CTensor data;

    std::size_t num_rx() const { return data.extent(0); }
    std::size_t num_subcarriers() const { return data.extent(1); }
    std::size_t num_symbols() const { return data.extent(2); }
    const cplx& operator()(std::size_t m, std::size_t i, std::size_t l) const { return data(m, i, l); }

    bool matches(const SystemConfig& cfg) const {
        return num_rx() == cfg.num_rx && num_subcarriers() == cfg.num_subcarriers &&
               num_symbols() == cfg.num_symbols;
    }
};

// ---------------------------------------------------------------------------
// Signed-bin conventions
//
// Angle and Doppler axes: storage k maps to n = k for k < ceil(N/2), else k - N.
// Delay axis: storage k maps to n_d = -k, so n_d lies in [-N_d + 1, 0].
// ---------------------------------------------------------------------------

inline long centered_bin(std::size_t k, std::size_t n) {
    return k < (n + 1) / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

inline std::size_t centered_storage(long bin, std::size_t n) {
    const long size = static_cast<long>(n);
    if (bin < -(size / 2) || bin >= (size + 1) / 2) throw Error("centered bin out of range");
    return static_cast<std::size_t>(bin < 0 ? bin + size : bin);
}

inline long delay_bin(std::size_t k) { return -static_cast<long>(k); }

inline std::size_t delay_storage(long bin, std::size_t n) {
    if (bin > 0 || -bin >= static_cast<long>(n)) throw Error("delay bin out of range");
    return static_cast<std::size_t>(-bin);
}

/// Digital frequency of DFT bin n on an N-point grid: 2 pi n / N.
inline double bin_frequency(long bin, std::size_t n) {
    return kTwoPi * static_cast<double>(bin) / static_cast<double>(n);
}

/// N_a x N_d x N_v processed cube, indexed by storage position.
struct RadarCube {
    CTensor data;

    std::size_t fft_angle() const { return data.extent(0); }
    std::size_t fft_delay() const { return data.extent(1); }
    std::size_t fft_doppler() const { return data.extent(2); }

    BinIndex bin_of(std::size_t ka, std::size_t kd, std::size_t kv) const {
        return {centered_bin(ka, fft_angle()), delay_bin(kd), centered_bin(kv, fft_doppler())};
    }
    const cplx& at(const BinIndex& b) const {
        return data(centered_storage(b.angle, fft_angle()), delay_storage(b.delay, fft_delay()),
                    centered_storage(b.doppler, fft_doppler()));
    }
};

// ---------------------------------------------------------------------------
// Digital-frequency maps
// ---------------------------------------------------------------------------

inline double omega_t(double theta, const SystemConfig& cfg) {
    return kTwoPi * cfg.tx_spacing * std::sin(theta) / cfg.wavelength();
}

inline double omega_r(double theta, const SystemConfig& cfg) {
    return -kTwoPi * cfg.rx_spacing * std::sin(theta) / cfg.wavelength();
}

inline double omega_d(double range, const SystemConfig& cfg) {
    if (range < 0) throw Error("omega_d: range must be non-negative");
    return -4.0 * kPi * cfg.subcarrier_spacing * range / cfg.speed_of_light;
}

inline double omega_v(double velocity, const SystemConfig& cfg) {
    return 4.0 * kPi * cfg.total_symbol_duration() * velocity * cfg.carrier_freq / cfg.speed_of_light;
}

/// a(omega) = [e^{j0}, e^{j omega}, ..., e^{j(n-1) omega}]^T
inline std::vector<cplx> steering_vector(double omega, std::size_t n) {
    if (n == 0) throw Error("steering_vector: length must be >= 1");
    std::vector<cplx> a(n);
    for (std::size_t k = 0; k < n; ++k) a[k] = std::polar(1.0, static_cast<double>(k) * omega);
    return a;
}

/// a^H(omega) x
inline cplx steering_inner(double omega, std::span<const cplx> x) {
    cplx acc{};
    for (std::size_t k = 0; k < x.size(); ++k)
        acc += std::polar(1.0, -static_cast<double>(k) * omega) * x[k];
    return acc;
}

/// PL(d) = c_0 (d / d_0)^{-alpha}
inline double path_loss(double distance, const SystemConfig& cfg) {
    if (!(distance > 0)) throw Error("path_loss: distance must be positive");
    return cfg.ref_loss * std::pow(distance / cfg.ref_distance, -cfg.path_loss_exp);
}

// ---------------------------------------------------------------------------
// Scene validation
// ---------------------------------------------------------------------------

struct Diagnostic {
    enum class Severity { warning, violation };
    Severity severity;
    std::string message;
};

/// Checks the cyclic-prefix condition (round-trip delay spread within T_cp)
/// and the unambiguous region for every target. Nothing here throws: the
/// caller decides what to do with violations.
inline std::vector<Diagnostic> check_scene(const SystemConfig& cfg, std::span<const Target> targets,
                                           bool strict_cp = false) {
    std::vector<Diagnostic> out;
    if (targets.empty()) return out;

    double dmin = targets[0].range, dmax = targets[0].range;
    for (const auto& t : targets) {
        dmin = std::min(dmin, t.range);
        dmax = std::max(dmax, t.range);
    }
    const double spread = 2.0 * (dmax - dmin) / cfg.speed_of_light;
    if (spread > cfg.cp_duration)
        out.push_back({Diagnostic::Severity::violation,
                       "round-trip delay spread " + std::to_string(spread) + " s exceeds T_cp"});
    const double absolute = 2.0 * dmax / cfg.speed_of_light;
    if (absolute > cfg.cp_duration)
        out.push_back({strict_cp ? Diagnostic::Severity::violation : Diagnostic::Severity::warning,
                       "round-trip delay of furthest target " + std::to_string(absolute) +
                           " s exceeds T_cp"});

    const double sin_max = std::min(1.0, cfg.wavelength() / (2.0 * cfg.rx_spacing));
    const double theta_max = std::asin(sin_max);
    const double d_max = cfg.speed_of_light / (2.0 * cfg.subcarrier_spacing);
    const double v_max = cfg.speed_of_light / (4.0 * cfg.total_symbol_duration() * cfg.carrier_freq);
    for (std::size_t q = 0; q < targets.size(); ++q) {
        const auto& t = targets[q];
        const std::string tag = "target " + std::to_string(q) + ": ";
        if (!(std::abs(t.theta) < theta_max))
            out.push_back({Diagnostic::Severity::warning, tag + "angle outside unambiguous region"});
        if (!(t.range > 0 && t.range < d_max))
            out.push_back({Diagnostic::Severity::warning, tag + "range outside unambiguous region"});
        if (!(std::abs(t.velocity) < v_max))
            out.push_back({Diagnostic::Severity::warning, tag + "velocity outside unambiguous region"});
    }
    return out;
}

inline bool has_violation(std::span<const Diagnostic> diags) {
    for (const auto& d : diags)
        if (d.severity == Diagnostic::Severity::violation) return true;
    return false;
}

}  // namespace isac

#endif  // ISAC_CORE_HPP
