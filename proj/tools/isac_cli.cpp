// Command-line front end: simulate, estimate, sweep, analyze, radar-image.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "isac/harness.hpp"
#include "isac/io.hpp"

namespace fs = std::filesystem;
using namespace isac;
using harness::json;

namespace {

constexpr int kExitConfig = 2;

struct ConfigError : Error {
    using Error::Error;
};

harness::ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return harness::parse_config(j);
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void require_valid(const harness::ExperimentConfig& cfg) {
    auto problems = harness::validate(cfg);
    if (problems.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    return os;
}

EchoCube load_echo(const std::string& path, const SystemConfig& sys) {
    EchoCube echo{io::load_tensor(path)};
    if (!echo.matches(sys))
        throw Error(path + ": echo cube shape does not match N_r x N_s x L of the configuration");
    return echo;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OFDM ISAC sensing simulator and estimators"};
    app.require_subcommand(1);

    std::string config_path;
    std::size_t sweep_index = 0, trial = 0;

    // simulate
    auto* sim = app.add_subcommand("simulate", "draw one trial and write its echo and transmit tensors");
    std::string echo_out = "echo.bin", tx_out = "tx.bin", targets_out;
    sim->add_option("-c,--config", config_path, "experiment config (JSON)");
    sim->add_option("--sweep-index", sweep_index, "sweep point to draw");
    sim->add_option("--trial", trial, "trial index");
    sim->add_option("--echo-out", echo_out, "echo cube file (N_r x N_s x L)");
    sim->add_option("--tx-out", tx_out, "transmit tensor file (N_t x N_s x L)");
    sim->add_option("--targets-out", targets_out, "ground-truth targets (JSON)");

    // estimate
    auto* est = app.add_subcommand("estimate", "estimate target parameters from an echo cube");
    std::string echo_in, tx_in, cube_out, estimator = "joint";
    std::size_t num_targets = 1;
    est->add_option("-c,--config", config_path, "experiment config (JSON)");
    est->add_option("--echo", echo_in, "echo cube file")->required();
    est->add_option("--tx", tx_in, "transmit tensor file")->required();
    est->add_option("-n,--targets", num_targets, "number of targets to report");
    est->add_option("-e,--estimator", estimator, "joint | joint_no_scaling | separate");
    est->add_option("--cube-out", cube_out, "write the radar cube (joint estimators only)");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Monte-Carlo RMSE sweep");
    std::string out_dir = "results";
    std::size_t workers = 0;
    sw->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    sw->add_option("-o,--out-dir", out_dir, "directory for trials.csv, summary.csv, manifest.json");
    sw->add_option("-j,--workers", workers, "override the worker count");

    // analyze
    auto* an = app.add_subcommand("analyze", "unambiguous limits, resolutions and SNR");
    bool as_json = false, no_snr = false;
    an->add_option("-c,--config", config_path, "experiment config (JSON)");
    an->add_flag("--json", as_json, "print JSON instead of a table");
    an->add_flag("--no-snr", no_snr, "skip the per-target SNR table");

    // radar-image
    auto* img = app.add_subcommand("radar-image", "2-D max-projection of a radar cube as CSV");
    std::string cube_in, axes = "angle-range", image_out;
    img->add_option("-c,--config", config_path, "experiment config (JSON)");
    auto* cube_opt = img->add_option("--cube", cube_in, "radar cube file (N_a x N_d x N_v)");
    img->add_option("--echo", echo_in, "echo cube file (processed with the joint estimator)")->excludes(cube_opt);
    img->add_option("--tx", tx_in, "transmit tensor file, with --echo");
    img->add_option("--axes", axes, "angle-range | angle-velocity | range-velocity");
    img->add_option("-o,--out", image_out, "output CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = load_config(config_path);
        const SystemConfig& sys = cfg.system;

        if (*sim) {
            require_valid(cfg);
            const auto scene = harness::build_trial(cfg, sweep_index, trial);
            for (const auto& d : check_scene(scene.system, scene.targets, cfg.strict_cp))
                std::cerr << "warning: " << d.message << '\n';
            io::save_tensor(echo_out, scene.echo.data);
            io::save_tensor(tx_out, scene.tx.x);
            json truth = json::array();
            for (const auto& t : scene.targets)
                truth.push_back({{"angle_deg", rad_to_deg(t.theta)},
                                 {"range_m", t.range},
                                 {"velocity_mps", t.velocity},
                                 {"beta", {t.beta.real(), t.beta.imag()}}});
            if (!targets_out.empty()) open_out(targets_out) << truth.dump(2) << '\n';
            else std::cout << truth.dump(2) << '\n';
        } else if (*est) {
            sys.validate();
            const EchoCube echo = load_echo(echo_in, sys);
            const TxSignal tx = raw_tx(io::load_tensor(tx_in));
            const auto kind = harness::parse_estimator(estimator);
            EstimateSet result;
            if (kind == harness::EstimatorKind::separate) {
                if (!cube_out.empty()) throw ConfigError("--cube-out needs a joint estimator");
                result = harness::run_estimator(kind, echo, tx, sys, num_targets, cfg.clamp_epsilon);
            } else {
                auto joint = estimate_joint(echo, tx, sys, num_targets,
                                            {kind == harness::EstimatorKind::joint, cfg.clamp_epsilon});
                if (!cube_out.empty()) io::save_tensor(cube_out, joint.cube.data);
                result = std::move(joint.estimates);
            }
            if (result.short_of_peaks)
                std::cerr << "warning: found " << result.size() << " peaks, " << num_targets << " requested\n";
            std::cout << harness::estimates_to_json(result).dump(2) << '\n';
        } else if (*sw) {
            if (workers > 0) cfg.workers = workers;
            require_valid(cfg);
            const auto result = harness::run_sweep(cfg);
            fs::create_directories(out_dir);
            {
                auto os = open_out((fs::path(out_dir) / "trials.csv").string());
                harness::write_trials_csv(os, result);
            }
            {
                auto os = open_out((fs::path(out_dir) / "summary.csv").string());
                harness::write_summary_csv(os, result);
            }
            open_out((fs::path(out_dir) / "manifest.json").string()) << harness::manifest(cfg, result).dump(2) << '\n';
            harness::write_summary_csv(std::cout, result);
        } else if (*an) {
            if (!no_snr) require_valid(cfg);
            else sys.validate();
            const auto rep = harness::analyze(cfg, !no_snr);
            if (as_json) std::cout << harness::report_to_json(rep).dump(2) << '\n';
            else harness::print_report(std::cout, rep);
        } else if (*img) {
            sys.validate();
            const auto pair = harness::parse_axis_pair(axes);
            RadarCube cube;
            if (!cube_in.empty()) {
                cube.data = io::load_tensor(cube_in);
            } else {
                if (echo_in.empty() || tx_in.empty()) throw ConfigError("radar-image needs --cube or --echo with --tx");
                const EchoCube echo = load_echo(echo_in, sys);
                cube = estimate_joint(echo, raw_tx(io::load_tensor(tx_in)), sys, 0).cube;
            }
            const auto image = harness::export_radar_image(cube, pair, sys);
            if (image_out.empty()) {
                harness::write_image_csv(std::cout, image);
            } else {
                auto os = open_out(image_out);
                harness::write_image_csv(os, image);
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
