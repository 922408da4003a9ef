// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver: flat JSON configs, per-trial scene/symbol/noise draws from
// derived seeds, Monte-Carlo sweeps over one variable, CSV/manifest output,
// closed-form analysis reports and radar-image export.

#ifndef ISAC_HARNESS_HPP
#define ISAC_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "isac/analysis.hpp"
#include "isac/core.hpp"
#include "isac/echo_sim.hpp"
#include "isac/estimator_joint.hpp"
#include "isac/estimator_separate.hpp"
#include "isac/rng.hpp"
#include "isac/txgen.hpp"

namespace isac::harness {

using json = nlohmann::ordered_json;

enum class EstimatorKind { joint, joint_no_scaling, separate };
enum class SweepVariable { none, tx_power_dbm, num_tx, num_symbols, num_rx, num_subcarriers, num_targets };
enum class SceneMode { random, fixed };
enum class BetaMode { random, deterministic };

inline const char* to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::joint: return "joint";
        case EstimatorKind::joint_no_scaling: return "joint_no_scaling";
        case EstimatorKind::separate: return "separate";
    }
    return "?";
}

inline EstimatorKind parse_estimator(const std::string& s) {
    if (s == "joint") return EstimatorKind::joint;
    if (s == "joint_no_scaling" || s == "joint-without-scaling") return EstimatorKind::joint_no_scaling;
    if (s == "separate") return EstimatorKind::separate;
    throw Error("unknown estimator '" + s + "'");
}

inline const char* to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::none: return "none";
        case SweepVariable::tx_power_dbm: return "tx_power_dbm";
        case SweepVariable::num_tx: return "N_t";
        case SweepVariable::num_symbols: return "L";
        case SweepVariable::num_rx: return "N_r";
        case SweepVariable::num_subcarriers: return "N_s";
        case SweepVariable::num_targets: return "num_targets";
    }
    return "?";
}

inline SweepVariable parse_sweep_variable(const std::string& s) {
    for (auto v : {SweepVariable::none, SweepVariable::tx_power_dbm, SweepVariable::num_tx, SweepVariable::num_symbols,
                   SweepVariable::num_rx, SweepVariable::num_subcarriers, SweepVariable::num_targets})
        if (s == to_string(v)) return v;
    throw Error("unknown sweep variable '" + s + "'");
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct SceneSpec {
    SceneMode mode = SceneMode::random;
    std::size_t num_targets = 1;
    Interval angle_deg{-30.0, 30.0};
    Interval range_m{40.0, 80.0};
    Interval velocity_mps{-50.0, 50.0};
    std::vector<Target> targets;  // fixed mode; beta taken from beta_mode
    BetaMode beta_mode = BetaMode::random;
};

struct ExperimentConfig {
    SystemConfig system = SystemConfig::desk_scale();
    std::size_t dft_padding = 3;  // 0 keeps the explicit N_a, N_d, N_v
    SceneSpec scene;
    SweepVariable sweep_variable = SweepVariable::none;
    std::vector<double> sweep_values;
    std::size_t trials = 200;
    std::vector<EstimatorKind> estimators{EstimatorKind::joint, EstimatorKind::joint_no_scaling,
                                          EstimatorKind::separate};
    std::uint64_t seed = 1;
    bool noise = true;
    bool sense_toward_targets = true;
    double sensing_fraction = -1.0;
    bool frequency_flat_channel = false;
    bool strict_cp = false;
    std::size_t workers = 1;
    double memory_cap_mb = 2048.0;
    bool record_timing = false;
    double clamp_epsilon = 1e-3;
};

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace detail {

inline Interval interval(const json& j, const char* key) {
    if (!j.is_array() || j.size() != 2) throw Error(std::string(key) + " must be a [lo, hi] pair");
    Interval iv{j[0].get<double>(), j[1].get<double>()};
    if (iv.hi < iv.lo) throw Error(std::string(key) + " must satisfy lo <= hi");
    return iv;
}

}  // namespace detail

/// Reads a flat JSON object. Physical quantities are SI; angles in degrees;
/// powers in dB/dBm as marked in the key name. Unknown keys are rejected.
inline ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw Error("config must be a JSON object");
    ExperimentConfig cfg;
    SystemConfig& s = cfg.system;
    bool has_dt = false, has_dr = false, has_fft = false;
    std::optional<double> total_t;

    for (const auto& [key, v] : j.items()) {
        if (key == "f_c") s.carrier_freq = v.get<double>();
        else if (key == "delta_f") s.subcarrier_spacing = v.get<double>();
        else if (key == "N_s") s.num_subcarriers = v.get<std::size_t>();
        else if (key == "T_cp") s.cp_duration = v.get<double>();
        else if (key == "T") total_t = v.get<double>();
        else if (key == "L") s.num_symbols = v.get<std::size_t>();
        else if (key == "N_t") s.num_tx = v.get<std::size_t>();
        else if (key == "N_r") s.num_rx = v.get<std::size_t>();
        else if (key == "d_t") { s.tx_spacing = v.get<double>(); has_dt = true; }
        else if (key == "d_r") { s.rx_spacing = v.get<double>(); has_dr = true; }
        else if (key == "c") s.speed_of_light = v.get<double>();
        else if (key == "c_0_db") s.ref_loss = db_to_linear(v.get<double>());
        else if (key == "d_0") s.ref_distance = v.get<double>();
        else if (key == "alpha") s.path_loss_exp = v.get<double>();
        else if (key == "sigma_beta_sq_db") s.beta_power = db_to_linear(v.get<double>());
        else if (key == "sigma_c_sq_dbm") s.comm_noise_power = dbm_to_watts(v.get<double>());
        else if (key == "sigma_s_sq_dbm") s.sense_noise_power = dbm_to_watts(v.get<double>());
        else if (key == "qam_order") s.qam_order = v.get<int>();
        else if (key == "N_a") { s.fft_angle = v.get<std::size_t>(); has_fft = true; }
        else if (key == "N_d") { s.fft_delay = v.get<std::size_t>(); has_fft = true; }
        else if (key == "N_v") { s.fft_doppler = v.get<std::size_t>(); has_fft = true; }
        else if (key == "K") s.num_users = v.get<std::size_t>();
        else if (key == "P_tx_dbm") s.tx_power = dbm_to_watts(v.get<double>());
        else if (key == "dft_padding") cfg.dft_padding = v.get<std::size_t>();
        else if (key == "scene") {
            const auto m = v.get<std::string>();
            if (m == "random") cfg.scene.mode = SceneMode::random;
            else if (m == "fixed") cfg.scene.mode = SceneMode::fixed;
            else throw Error("scene must be 'random' or 'fixed'");
        }
        else if (key == "num_targets") cfg.scene.num_targets = v.get<std::size_t>();
        else if (key == "angle_deg_range") cfg.scene.angle_deg = detail::interval(v, "angle_deg_range");
        else if (key == "range_m_range") cfg.scene.range_m = detail::interval(v, "range_m_range");
        else if (key == "velocity_mps_range") cfg.scene.velocity_mps = detail::interval(v, "velocity_mps_range");
        else if (key == "targets") {
            cfg.scene.targets.clear();
            for (const auto& t : v) {
                if (!t.is_array() || t.size() != 3) throw Error("targets entries must be [angle_deg, range_m, velocity_mps]");
                cfg.scene.targets.push_back({deg_to_rad(t[0].get<double>()), t[1].get<double>(), t[2].get<double>(), 1.0});
            }
        }
        else if (key == "beta") {
            const auto m = v.get<std::string>();
            if (m == "random") cfg.scene.beta_mode = BetaMode::random;
            else if (m == "deterministic") cfg.scene.beta_mode = BetaMode::deterministic;
            else throw Error("beta must be 'random' or 'deterministic'");
        }
        else if (key == "sweep_variable") cfg.sweep_variable = parse_sweep_variable(v.get<std::string>());
        else if (key == "sweep_values") cfg.sweep_values = v.get<std::vector<double>>();
        else if (key == "trials") cfg.trials = v.get<std::size_t>();
        else if (key == "estimators") {
            cfg.estimators.clear();
            for (const auto& e : v) cfg.estimators.push_back(parse_estimator(e.get<std::string>()));
        }
        else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
        else if (key == "noise") cfg.noise = v.get<bool>();
        else if (key == "sense_toward_targets") cfg.sense_toward_targets = v.get<bool>();
        else if (key == "sensing_fraction") cfg.sensing_fraction = v.get<double>();
        else if (key == "frequency_flat_channel") cfg.frequency_flat_channel = v.get<bool>();
        else if (key == "strict_cp") cfg.strict_cp = v.get<bool>();
        else if (key == "workers") cfg.workers = v.get<std::size_t>();
        else if (key == "memory_cap_mb") cfg.memory_cap_mb = v.get<double>();
        else if (key == "record_timing") cfg.record_timing = v.get<bool>();
        else if (key == "clamp_epsilon") cfg.clamp_epsilon = v.get<double>();
        else throw Error("unknown config key '" + key + "'");
    }

    if (total_t) s.cp_duration = *total_t - s.symbol_duration();
    if (!has_dt) s.tx_spacing = 0.5 * s.wavelength();
    if (!has_dr) s.rx_spacing = 0.5 * s.wavelength();
    if (has_fft) cfg.dft_padding = j.contains("dft_padding") ? cfg.dft_padding : 0;
    if (cfg.dft_padding > 0) s.set_dft_padding(cfg.dft_padding);
    if (cfg.scene.mode == SceneMode::fixed) cfg.scene.num_targets = cfg.scene.targets.size();
    return cfg;
}

/// Resolved configuration in the same flat key space the parser reads.
inline json to_json(const ExperimentConfig& cfg) {
    const SystemConfig& s = cfg.system;
    json j;
    j["f_c"] = s.carrier_freq;
    j["delta_f"] = s.subcarrier_spacing;
    j["N_s"] = s.num_subcarriers;
    j["T_cp"] = s.cp_duration;
    j["L"] = s.num_symbols;
    j["N_t"] = s.num_tx;
    j["N_r"] = s.num_rx;
    j["d_t"] = s.tx_spacing;
    j["d_r"] = s.rx_spacing;
    j["c"] = s.speed_of_light;
    j["c_0_db"] = linear_to_db(s.ref_loss);
    j["d_0"] = s.ref_distance;
    j["alpha"] = s.path_loss_exp;
    j["sigma_beta_sq_db"] = linear_to_db(s.beta_power);
    j["sigma_c_sq_dbm"] = linear_to_db(s.comm_noise_power) + 30.0;
    j["sigma_s_sq_dbm"] = linear_to_db(s.sense_noise_power) + 30.0;
    j["qam_order"] = s.qam_order;
    j["dft_padding"] = cfg.dft_padding;
    j["N_a"] = s.fft_angle;
    j["N_d"] = s.fft_delay;
    j["N_v"] = s.fft_doppler;
    j["K"] = s.num_users;
    j["P_tx_dbm"] = s.tx_power > 0 ? linear_to_db(s.tx_power) + 30.0 : -1e300;
    j["scene"] = cfg.scene.mode == SceneMode::random ? "random" : "fixed";
    j["num_targets"] = cfg.scene.num_targets;
    j["angle_deg_range"] = {cfg.scene.angle_deg.lo, cfg.scene.angle_deg.hi};
    j["range_m_range"] = {cfg.scene.range_m.lo, cfg.scene.range_m.hi};
    j["velocity_mps_range"] = {cfg.scene.velocity_mps.lo, cfg.scene.velocity_mps.hi};
    json targets = json::array();
    for (const auto& t : cfg.scene.targets) targets.push_back({rad_to_deg(t.theta), t.range, t.velocity});
    j["targets"] = targets;
    j["beta"] = cfg.scene.beta_mode == BetaMode::random ? "random" : "deterministic";
    j["sweep_variable"] = to_string(cfg.sweep_variable);
    j["sweep_values"] = cfg.sweep_values;
    j["trials"] = cfg.trials;
    json est = json::array();
    for (auto e : cfg.estimators) est.push_back(to_string(e));
    j["estimators"] = est;
    j["seed"] = cfg.seed;
    j["noise"] = cfg.noise;
    j["sense_toward_targets"] = cfg.sense_toward_targets;
    j["sensing_fraction"] = cfg.sensing_fraction;
    j["frequency_flat_channel"] = cfg.frequency_flat_channel;
    j["strict_cp"] = cfg.strict_cp;
    j["workers"] = cfg.workers;
    j["memory_cap_mb"] = cfg.memory_cap_mb;
    j["record_timing"] = cfg.record_timing;
    j["clamp_epsilon"] = cfg.clamp_epsilon;
    return j;
}

// ---------------------------------------------------------------------------
// Sweep points and validation
// ---------------------------------------------------------------------------

struct SweepPoint {
    double value = 0.0;
    SystemConfig system;
    std::size_t num_targets = 0;
};

inline std::vector<double> sweep_values(const ExperimentConfig& cfg) {
    if (cfg.sweep_variable == SweepVariable::none || cfg.sweep_values.empty()) return {0.0};
    return cfg.sweep_values;
}

inline SweepPoint sweep_point(const ExperimentConfig& cfg, std::size_t index) {
    const auto values = sweep_values(cfg);
    if (index >= values.size()) throw Error("sweep index out of range");
    SweepPoint p{values[index], cfg.system, cfg.scene.num_targets};
    const double v = p.value;
    auto count = [&](const char* what) {
        if (!(v >= 1.0) || v != std::floor(v)) throw Error(std::string(what) + " sweep values must be positive integers");
        return static_cast<std::size_t>(v);
    };
    switch (cfg.sweep_variable) {
        case SweepVariable::none: break;
        case SweepVariable::tx_power_dbm: p.system.tx_power = dbm_to_watts(v); break;
        case SweepVariable::num_tx: p.system.num_tx = count("N_t"); break;
        case SweepVariable::num_symbols: p.system.num_symbols = count("L"); break;
        case SweepVariable::num_rx: p.system.num_rx = count("N_r"); break;
        case SweepVariable::num_subcarriers: p.system.num_subcarriers = count("N_s"); break;
        case SweepVariable::num_targets:
            if (cfg.scene.mode == SceneMode::fixed) throw Error("num_targets sweep requires a random scene");
            p.num_targets = v >= 0 && v == std::floor(v) ? static_cast<std::size_t>(v)
                                                         : throw Error("num_targets sweep values must be integers");
            break;
    }
    if (cfg.dft_padding > 0) p.system.set_dft_padding(cfg.dft_padding);
    return p;
}

inline double radar_cube_megabytes(const SystemConfig& s) {
    return static_cast<double>(s.fft_angle) * static_cast<double>(s.fft_delay) *
           static_cast<double>(s.fft_doppler) * sizeof(cplx) / (1024.0 * 1024.0);
}

/// Every problem with every sweep point, before anything is simulated.
inline std::vector<std::string> validate(const ExperimentConfig& cfg) {
    std::vector<std::string> problems;
    if (cfg.trials == 0) problems.push_back("trials must be >= 1");
    if (cfg.estimators.empty()) problems.push_back("at least one estimator is required");
    if (cfg.sweep_variable != SweepVariable::none && cfg.sweep_values.empty())
        problems.push_back("sweep_values is empty");
    if (cfg.scene.mode == SceneMode::fixed && cfg.scene.targets.empty() && cfg.sweep_variable != SweepVariable::none)
        problems.push_back("fixed scene has no targets");
    const auto values = sweep_values(cfg);
    for (std::size_t k = 0; k < values.size(); ++k) {
        const std::string tag = "sweep point " + std::to_string(k) + " (" + to_string(cfg.sweep_variable) + "=" +
                                std::to_string(values[k]) + "): ";
        try {
            const SweepPoint p = sweep_point(cfg, k);
            p.system.validate();
            const std::size_t sensing = cfg.sense_toward_targets ? p.num_targets : 0;
            if (p.system.num_users + sensing > p.system.num_tx)
                problems.push_back(tag + "K + sensing directions (" + std::to_string(p.system.num_users + sensing) +
                                   ") exceeds N_t (" + std::to_string(p.system.num_tx) + ")");
            const double mb = radar_cube_megabytes(p.system);
            if (mb > cfg.memory_cap_mb)
                problems.push_back(tag + "radar cube needs " + std::to_string(mb) + " MB, above the cap of " +
                                   std::to_string(cfg.memory_cap_mb) +
                                   " MB; reduce N_r/N_s/L (e.g. 8/64/32) or dft_padding");
            if (cfg.scene.mode == SceneMode::fixed) {
                auto diags = check_scene(p.system, cfg.scene.targets, cfg.strict_cp);
                for (const auto& d : diags)
                    if (d.severity == Diagnostic::Severity::violation) problems.push_back(tag + d.message);
            } else {
                std::vector<Target> extremes{{0, cfg.scene.range_m.lo, 0, 1.0}, {0, cfg.scene.range_m.hi, 0, 1.0}};
                for (const auto& d : check_scene(p.system, extremes, cfg.strict_cp))
                    if (d.severity == Diagnostic::Severity::violation) problems.push_back(tag + d.message);
            }
        } catch (const std::exception& e) {
            problems.push_back(tag + e.what());
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

/// Everything drawn for one (sweep point, trial).
struct TrialScene {
    SystemConfig system;
    std::vector<Target> targets;
    TxSignal tx;
    EchoCube echo;
};

inline std::vector<Target> draw_targets(const ExperimentConfig& cfg, std::size_t count, std::uint64_t scene_seed,
                                        std::uint64_t beta_seed) {
    std::vector<Target> targets;
    if (cfg.scene.mode == SceneMode::fixed) {
        targets = cfg.scene.targets;
    } else {
        Rng rng(scene_seed);
        for (std::size_t q = 0; q < count; ++q) {
            Target t;
            t.theta = deg_to_rad(rng.uniform(cfg.scene.angle_deg.lo, cfg.scene.angle_deg.hi));
            t.range = rng.uniform(cfg.scene.range_m.lo, cfg.scene.range_m.hi);
            t.velocity = rng.uniform(cfg.scene.velocity_mps.lo, cfg.scene.velocity_mps.hi);
            targets.push_back(t);
        }
    }
    const auto betas = reflection_coefficients(targets.size(), cfg.system.beta_power, beta_seed);
    for (std::size_t q = 0; q < targets.size(); ++q)
        targets[q].beta = cfg.scene.beta_mode == BetaMode::random ? betas[q] : cplx(std::sqrt(cfg.system.beta_power), 0.0);
    return targets;
}

/// Transmit signal for a scene: random channel, ZF precoder toward the users
/// (and the target directions when enabled), QAM symbols on every stream.
inline TxSignal build_tx(const ExperimentConfig& cfg, const SystemConfig& sys, std::span<const Target> targets,
                         std::uint64_t channel_seed, std::uint64_t symbol_seed) {
    const auto channel = random_comm_channel(sys.num_users, sys.num_subcarriers, sys.num_tx, channel_seed,
                                             cfg.frequency_flat_channel);
    std::vector<double> dirs;
    if (cfg.sense_toward_targets)
        for (const auto& t : targets) dirs.push_back(t.theta);
    auto precoders = zf_precoder(channel, dirs, sys, cfg.sensing_fraction);
    auto symbols = gen_qam_symbols(precoders.num_streams(), sys.num_subcarriers, sys.num_symbols, sys.qam_order,
                                   symbol_seed);
    return assemble_tx(std::move(precoders), std::move(symbols));
}

inline TrialScene build_trial(const ExperimentConfig& cfg, std::size_t sweep_index, std::size_t trial) {
    const SweepPoint p = sweep_point(cfg, sweep_index);
    TrialScene scene;
    scene.system = p.system;
    ExperimentConfig local = cfg;
    local.system = p.system;
    scene.targets = draw_targets(local, p.num_targets, derive_seed(cfg.seed, sweep_index, trial, SeedPurpose::scene),
                                 derive_seed(cfg.seed, sweep_index, trial, SeedPurpose::reflection));
    scene.tx = build_tx(local, p.system, scene.targets, derive_seed(cfg.seed, sweep_index, trial, SeedPurpose::channel),
                        derive_seed(cfg.seed, sweep_index, trial, SeedPurpose::symbols));
    scene.echo = simulate_echo_cube(p.system, scene.targets, scene.tx, cfg.noise,
                                    derive_seed(cfg.seed, sweep_index, trial, SeedPurpose::noise));
    return scene;
}

inline EstimateSet run_estimator(EstimatorKind kind, const EchoCube& echo, const TxSignal& tx, const SystemConfig& sys,
                                 std::size_t count, double clamp_epsilon = 1e-3) {
    switch (kind) {
        case EstimatorKind::joint:
            return estimate_joint(echo, tx, sys, count, {true, clamp_epsilon}).estimates;
        case EstimatorKind::joint_no_scaling:
            return estimate_joint(echo, tx, sys, count, {false, clamp_epsilon}).estimates;
        case EstimatorKind::separate: {
            SeparateOptions opt;
            opt.clamp_epsilon = clamp_epsilon;
            return estimate_separate(echo, tx, sys, count, opt);
        }
    }
    return {};
}

/// Squared error charged for a missed target: the extent of the region the
/// targets are drawn from (random scenes) or of the unambiguous region (fixed).
inline ErrorPenalty miss_penalty(const ExperimentConfig& cfg, const SystemConfig& sys) {
    if (cfg.scene.mode == SceneMode::random)
        return {deg_to_rad(cfg.scene.angle_deg.hi - cfg.scene.angle_deg.lo), cfg.scene.range_m.hi - cfg.scene.range_m.lo,
                cfg.scene.velocity_mps.hi - cfg.scene.velocity_mps.lo};
    const auto lim = max_unambiguous(sys);
    return {2.0 * lim.theta_max, lim.range_max, 2.0 * lim.velocity_max};
}

struct TrialResult {
    double sweep_value = 0.0;
    std::size_t sweep_index = 0;
    std::size_t trial = 0;
    EstimatorKind estimator = EstimatorKind::joint;
    std::vector<Target> truth;
    EstimateSet estimates;
    TrialErrors errors;
    double mean_peak_magnitude = 0.0;
    double wall_ms = 0.0;
};

struct SummaryRow {
    double sweep_value = 0.0;
    EstimatorKind estimator = EstimatorKind::joint;
    double rmse_angle_deg = 0.0;
    double rmse_range_m = 0.0;
    double rmse_velocity_mps = 0.0;
    std::size_t trials = 0;
    std::size_t missed = 0;
};

struct SweepResult {
    std::vector<TrialResult> rows;  // ordered by (sweep point, trial, estimator)
    std::vector<SummaryRow> summary;

    const SummaryRow& find(double sweep_value, EstimatorKind kind) const {
        for (const auto& s : summary)
            if (s.sweep_value == sweep_value && s.estimator == kind) return s;
        throw Error("no summary row for the requested sweep value and estimator");
    }
};

inline std::vector<TrialResult> run_trial(const ExperimentConfig& cfg, std::size_t sweep_index, std::size_t trial) {
    const TrialScene scene = build_trial(cfg, sweep_index, trial);
    const Resolutions res = resolutions(scene.system);
    const ErrorPenalty penalty = miss_penalty(cfg, scene.system);
    const double value = sweep_values(cfg)[sweep_index];
    std::vector<TrialResult> out;
    for (auto kind : cfg.estimators) {
        const auto t0 = std::chrono::steady_clock::now();
        TrialResult r;
        r.sweep_value = value;
        r.sweep_index = sweep_index;
        r.trial = trial;
        r.estimator = kind;
        r.truth = scene.targets;
        r.estimates = run_estimator(kind, scene.echo, scene.tx, scene.system, scene.targets.size(), cfg.clamp_epsilon);
        const auto t1 = std::chrono::steady_clock::now();
        if (cfg.record_timing) r.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (!scene.targets.empty()) r.errors = score_trial(scene.targets, r.estimates, res, penalty);
        double mags = 0.0;
        for (const auto& e : r.estimates.items) mags += e.magnitude;
        r.mean_peak_magnitude = r.estimates.empty() ? 0.0 : mags / static_cast<double>(r.estimates.size());
        out.push_back(std::move(r));
    }
    return out;
}

/// Runs every (sweep point, trial) on `cfg.workers` threads. Results are
/// stored by index, so output does not depend on completion order.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
    if (auto problems = validate(cfg); !problems.empty()) {
        std::string msg = "invalid experiment configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw Error(msg);
    }
    const auto values = sweep_values(cfg);
    const std::size_t jobs = values.size() * cfg.trials;
    std::vector<std::vector<TrialResult>> slots(jobs);

    double worst_mb = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) worst_mb = std::max(worst_mb, radar_cube_megabytes(sweep_point(cfg, k).system));
    std::size_t workers = std::max<std::size_t>(1, cfg.workers);
    if (worst_mb > 0) workers = std::min(workers, std::max<std::size_t>(1, static_cast<std::size_t>(cfg.memory_cap_mb / worst_mb)));
    workers = std::min(workers, jobs);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t job; (job = next.fetch_add(1)) < jobs;) {
            try {
                slots[job] = run_trial(cfg, job / cfg.trials, job % cfg.trials);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = jobs;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    SweepResult result;
    for (auto& slot : slots)
        for (auto& r : slot) result.rows.push_back(std::move(r));

    for (std::size_t k = 0; k < values.size(); ++k)
        for (auto kind : cfg.estimators) {
            std::vector<TrialErrors> errs;
            SummaryRow row{values[k], kind};
            for (const auto& r : result.rows)
                if (r.sweep_index == k && r.estimator == kind && !r.truth.empty()) {
                    errs.push_back(r.errors);
                    row.missed += r.errors.missed;
                }
            row.trials = errs.size();
            if (!errs.empty()) {
                row.rmse_angle_deg = rad_to_deg(rmse(errs, Dimension::angle));
                row.rmse_range_m = rmse(errs, Dimension::range);
                row.rmse_velocity_mps = rmse(errs, Dimension::velocity);
            }
            result.summary.push_back(row);
        }
    return result;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline std::string format_number(double v, int digits = 10) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

/// One row per (sweep point, trial, estimator); per-trial RMSE columns are
/// the square roots of that trial's mean squared errors.
inline void write_trials_csv(std::ostream& os, const SweepResult& result) {
    os << "sweep_value,trial,estimator,rmse_angle_deg,rmse_range_m,rmse_velocity_mps,mean_peak_mag,clamp_count,wall_ms\n";
    for (const auto& r : result.rows) {
        os << format_number(r.sweep_value) << ',' << r.trial << ',' << to_string(r.estimator) << ','
           << format_number(rad_to_deg(std::sqrt(r.errors.angle))) << ',' << format_number(std::sqrt(r.errors.range))
           << ',' << format_number(std::sqrt(r.errors.velocity)) << ',' << format_number(r.mean_peak_magnitude) << ','
           << r.estimates.clamp_count << ',' << format_number(r.wall_ms, 6) << '\n';
    }
}

inline void write_summary_csv(std::ostream& os, const SweepResult& result) {
    os << "sweep_value,estimator,trials,rmse_angle_deg,rmse_range_m,rmse_velocity_mps,missed_targets\n";
    for (const auto& s : result.summary)
        os << format_number(s.sweep_value) << ',' << to_string(s.estimator) << ',' << s.trials << ','
           << format_number(s.rmse_angle_deg) << ',' << format_number(s.rmse_range_m) << ','
           << format_number(s.rmse_velocity_mps) << ',' << s.missed << '\n';
}

inline json manifest(const ExperimentConfig& cfg, const SweepResult& result) {
    json j;
    j["config"] = to_json(cfg);
    j["seed_derivation"] =
        "splitmix64 fold of (master seed, sweep index, trial index, purpose); purposes: 1 scene, 2 reflection, "
        "3 symbols, 4 channel, 5 sensing noise";
    j["rows"] = result.rows.size();
    json summary = json::array();
    for (const auto& s : result.summary)
        summary.push_back({{"sweep_value", s.sweep_value},
                           {"estimator", to_string(s.estimator)},
                           {"trials", s.trials},
                           {"rmse_angle_deg", s.rmse_angle_deg},
                           {"rmse_range_m", s.rmse_range_m},
                           {"rmse_velocity_mps", s.rmse_velocity_mps},
                           {"missed_targets", s.missed}});
    j["summary"] = summary;
    return j;
}

inline json estimates_to_json(const EstimateSet& est) {
    json items = json::array();
    for (const auto& e : est.items)
        items.push_back({{"angle_deg", rad_to_deg(e.theta)},
                         {"range_m", e.range},
                         {"velocity_mps", e.velocity},
                         {"peak_magnitude", e.magnitude},
                         {"bin", {e.bin.angle, e.bin.delay, e.bin.doppler}},
                         {"ambiguous", e.ambiguous}});
    return {{"requested", est.requested},
            {"short_of_peaks", est.short_of_peaks},
            {"clamp_count", est.clamp_count},
            {"estimates", items}};
}

// ---------------------------------------------------------------------------
// Closed-form analysis report
// ---------------------------------------------------------------------------

struct TargetSnr {
    Target target;
    double received = 0.0;
    double output = 0.0;
};

struct AnalysisReport {
    UnambiguousLimits limits;
    Resolutions res;
    double gain_bound = 0.0;
    std::vector<TargetSnr> snr;
};

/// Limits and resolutions of the base system plus received/output SNR of the
/// trial-0 scene (sweep point 0) under its drawn transmit signal.
inline AnalysisReport analyze(const ExperimentConfig& cfg, bool with_snr = true) {
    AnalysisReport rep;
    rep.limits = max_unambiguous(cfg.system);
    rep.res = resolutions(cfg.system);
    rep.gain_bound = static_cast<double>(cfg.system.num_rx * cfg.system.num_subcarriers * cfg.system.num_symbols);
    if (with_snr) {
        const SweepPoint p = sweep_point(cfg, 0);
        ExperimentConfig local = cfg;
        local.system = p.system;
        auto targets = draw_targets(local, p.num_targets, derive_seed(cfg.seed, 0, 0, SeedPurpose::scene),
                                    derive_seed(cfg.seed, 0, 0, SeedPurpose::reflection));
        const TxSignal tx = build_tx(local, p.system, targets, derive_seed(cfg.seed, 0, 0, SeedPurpose::channel),
                                     derive_seed(cfg.seed, 0, 0, SeedPurpose::symbols));
        for (const auto& t : targets)
            rep.snr.push_back({t, received_snr(p.system, t, tx), output_snr(p.system, t, tx, cfg.clamp_epsilon)});
    }
    return rep;
}

inline void print_report(std::ostream& os, const AnalysisReport& rep) {
    auto line = [&](const char* name, const std::string& value, const char* unit) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-34s %16s  %s\n", name, value.c_str(), unit);
        os << buf;
    };
    line("max unambiguous angle", format_number(rad_to_deg(rep.limits.theta_max), 8), "deg");
    line("max unambiguous range", format_number(rep.limits.range_max, 8), "m");
    line("max unambiguous velocity", format_number(rep.limits.velocity_max, 8), "m/s");
    line("angular resolution (sine domain)", format_number(rep.res.angle_sin, 8), "");
    line("range resolution", format_number(rep.res.range, 8), "m");
    line("velocity resolution", format_number(rep.res.velocity, 8), "m/s");
    line("processing gain bound N_r*N_s*L", format_number(linear_to_db(rep.gain_bound), 8), "dB");
    for (std::size_t q = 0; q < rep.snr.size(); ++q) {
        const auto& s = rep.snr[q];
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "target %zu (%.3f deg, %.3f m, %.3f m/s): received SNR %.3f dB, output SNR %.3f dB, gain %.3f dB\n",
                      q, rad_to_deg(s.target.theta), s.target.range, s.target.velocity, linear_to_db(s.received),
                      linear_to_db(s.output), linear_to_db(s.output / s.received));
        os << buf;
    }
}

inline json report_to_json(const AnalysisReport& rep) {
    json snr = json::array();
    for (const auto& s : rep.snr)
        snr.push_back({{"angle_deg", rad_to_deg(s.target.theta)},
                       {"range_m", s.target.range},
                       {"velocity_mps", s.target.velocity},
                       {"received_snr_db", linear_to_db(s.received)},
                       {"output_snr_db", linear_to_db(s.output)}});
    return {{"theta_max_deg", rad_to_deg(rep.limits.theta_max)},
            {"d_max_m", rep.limits.range_max},
            {"v_max_mps", rep.limits.velocity_max},
            {"delta_a_sin", rep.res.angle_sin},
            {"delta_d_m", rep.res.range},
            {"delta_v_mps", rep.res.velocity},
            {"gain_bound_db", linear_to_db(rep.gain_bound)},
            {"targets", snr}};
}

// ---------------------------------------------------------------------------
// Radar images
// ---------------------------------------------------------------------------

enum class AxisPair { angle_range, angle_velocity, range_velocity };

inline AxisPair parse_axis_pair(const std::string& s) {
    if (s == "angle-range") return AxisPair::angle_range;
    if (s == "angle-velocity") return AxisPair::angle_velocity;
    if (s == "range-velocity") return AxisPair::range_velocity;
    throw Error("invalid axis pair '" + s + "' (expected angle-range, angle-velocity or range-velocity)");
}

struct RadarImage {
    std::string row_label, col_label;
    std::vector<double> rows, cols;  // physical coordinates, ascending
    std::vector<double> values;      // rows.size() x cols.size(), max |Y| over the third axis

    double at(std::size_t r, std::size_t c) const { return values[r * cols.size() + c]; }
};

namespace detail {

/// Storage indices of one axis ordered by ascending physical value.
inline std::vector<std::size_t> ordered_axis(int axis, std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t k = 0; k < n; ++k) idx[k] = k;
    if (axis == 0) {
        // angle decreases with signed bin
        std::sort(idx.begin(), idx.end(), [n](auto a, auto b) { return centered_bin(a, n) > centered_bin(b, n); });
    } else if (axis == 2) {
        std::sort(idx.begin(), idx.end(), [n](auto a, auto b) { return centered_bin(a, n) < centered_bin(b, n); });
    }
    return idx;  // delay: storage order is ascending range
}

inline double axis_value(int axis, std::size_t k, const RadarCube& cube, const SystemConfig& cfg) {
    switch (axis) {
        case 0: return rad_to_deg(bin_angle(centered_bin(k, cube.fft_angle()), cfg));
        case 1: return bin_range(delay_bin(k), cfg);
        default: return bin_velocity(centered_bin(k, cube.fft_doppler()), cfg);
    }
}

}  // namespace detail

/// Max-reduction of |Y| over the axis not in `pair`; rows and columns carry
/// physical coordinates (deg, m, m/s).
inline RadarImage export_radar_image(const RadarCube& cube, AxisPair pair, const SystemConfig& cfg) {
    if (cube.fft_angle() != cfg.fft_angle || cube.fft_delay() != cfg.fft_delay || cube.fft_doppler() != cfg.fft_doppler)
        throw Error("export_radar_image: cube dimensions do not match the configuration DFT sizes");
    const int ra = pair == AxisPair::range_velocity ? 1 : 0;
    const int ca = pair == AxisPair::angle_range ? 1 : 2;
    const int reduced = 3 - ra - ca;
    static const char* labels[3] = {"angle_deg", "range_m", "velocity_mps"};
    const auto& dims = cube.data.dims();

    RadarImage img;
    img.row_label = labels[ra];
    img.col_label = labels[ca];
    const auto rorder = detail::ordered_axis(ra, dims[ra]);
    const auto corder = detail::ordered_axis(ca, dims[ca]);
    for (auto k : rorder) img.rows.push_back(detail::axis_value(ra, k, cube, cfg));
    for (auto k : corder) img.cols.push_back(detail::axis_value(ca, k, cube, cfg));
    img.values.assign(rorder.size() * corder.size(), 0.0);
    for (std::size_t r = 0; r < rorder.size(); ++r)
        for (std::size_t c = 0; c < corder.size(); ++c) {
            double best = 0.0;
            std::size_t idx[3];
            idx[ra] = rorder[r];
            idx[ca] = corder[c];
            for (std::size_t k = 0; k < dims[reduced]; ++k) {
                idx[reduced] = k;
                best = std::max(best, std::abs(cube.data(idx[0], idx[1], idx[2])));
            }
            img.values[r * corder.size() + c] = best;
        }
    return img;
}

inline void write_image_csv(std::ostream& os, const RadarImage& img) {
    os << img.row_label << '\\' << img.col_label;
    for (double c : img.cols) os << ',' << format_number(c, 8);
    os << '\n';
    for (std::size_t r = 0; r < img.rows.size(); ++r) {
        os << format_number(img.rows[r], 8);
        for (std::size_t c = 0; c < img.cols.size(); ++c) os << ',' << format_number(img.at(r, c));
        os << '\n';
    }
}

}  // namespace isac::harness

#endif  // ISAC_HARNESS_HPP
