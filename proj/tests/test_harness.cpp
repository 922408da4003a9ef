#include <gtest/gtest.h>

#include <sstream>

#include "isac/harness.hpp"
#include "isac/io.hpp"
#include "test_util.hpp"

using namespace isac;
using namespace isac::harness;

namespace {

ExperimentConfig parse(const char* text) { return parse_config(json::parse(text)); }

std::string trials_csv(const SweepResult& r) {
    std::ostringstream os;
    write_trials_csv(os, r);
    return os.str();
}

}  // namespace

TEST(Config, DefaultsAreDeskScale) {
    const auto cfg = parse("{}");
    EXPECT_EQ(cfg.system.num_tx, 8u);
    EXPECT_EQ(cfg.system.num_subcarriers, 64u);
    EXPECT_EQ(cfg.system.fft_delay, 192u);
    EXPECT_EQ(cfg.trials, 200u);
    EXPECT_NEAR(cfg.system.total_symbol_duration(), 8.92e-6, 1e-18);
}

TEST(Config, UnitsAtTheBoundary) {
    const auto cfg = parse(R"({"f_c": 30e9, "P_tx_dbm": 20, "sigma_s_sq_dbm": -70, "sigma_beta_sq_db": -3,
                               "c_0_db": -20, "T": 10e-6, "N_r": 4, "dft_padding": 2})");
    EXPECT_NEAR(cfg.system.tx_power, 0.1, 1e-15);
    EXPECT_NEAR(cfg.system.sense_noise_power, 1e-10, 1e-22);
    EXPECT_NEAR(cfg.system.beta_power, 0.50118723, 1e-8);
    EXPECT_NEAR(cfg.system.ref_loss, 0.01, 1e-15);
    EXPECT_NEAR(cfg.system.total_symbol_duration(), 10e-6, 1e-18);
    EXPECT_NEAR(cfg.system.rx_spacing, 0.005, 1e-15);  // half wavelength at 30 GHz
    EXPECT_EQ(cfg.system.fft_angle, 8u);

    const auto explicit_sizes = parse(R"({"N_a": 40, "N_d": 100, "N_v": 50})");
    EXPECT_EQ(explicit_sizes.system.fft_angle, 40u);
    EXPECT_EQ(explicit_sizes.system.fft_doppler, 50u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse(R"({"N_tx": 4})"), Error);
    EXPECT_THROW(parse(R"({"scene": "maybe"})"), Error);
    EXPECT_THROW(parse(R"({"estimators": ["joint", "music"]})"), Error);
    EXPECT_THROW(parse(R"({"angle_deg_range": [10, -10]})"), Error);
    EXPECT_THROW(parse("[1, 2]"), Error);
}

TEST(Config, ResolvedConfigRoundTrips) {
    const auto cfg = parse(R"({"N_t": 6, "sweep_variable": "L", "sweep_values": [16, 32], "seed": 9,
                               "scene": "fixed", "targets": [[10, 40, 5], [-20, 60, -5]]})");
    const auto again = parse_config(to_json(cfg));
    EXPECT_EQ(to_json(again).dump(), to_json(cfg).dump());
    EXPECT_EQ(again.scene.targets.size(), 2u);
    EXPECT_EQ(again.scene.num_targets, 2u);
}

TEST(Validate, ResourceGuardAndStreamCount) {
    auto big = parse(R"({"N_r": 16, "N_s": 512, "L": 256, "N_t": 16, "memory_cap_mb": 512})");
    const auto problems = validate(big);
    ASSERT_FALSE(problems.empty());
    EXPECT_NE(problems[0].find("reduce"), std::string::npos);
    EXPECT_THROW(run_sweep(big), Error);

    auto crowded = parse(R"({"N_t": 3, "K": 3, "num_targets": 1})");
    EXPECT_FALSE(validate(crowded).empty());

    auto cp = parse(R"({"scene": "fixed", "targets": [[0, 10, 0], [0, 120, 0]], "trials": 1})");
    EXPECT_FALSE(validate(cp).empty());
    EXPECT_TRUE(validate(parse(R"({"trials": 1})")).empty());
}

TEST(Sweep, OnGridNoiseFreeJointIsExact) {
    auto cfg = parse(R"({"scene": "fixed", "noise": false, "trials": 1, "estimators": ["joint", "separate"]})");
    cfg.scene.targets = {testutil::on_grid(cfg.system, 3, -40, -7, 1.0)};
    cfg.scene.num_targets = 1;
    const auto r = run_sweep(cfg);
    ASSERT_EQ(r.rows.size(), 2u);
    for (const auto& row : r.rows) {
        EXPECT_NEAR(row.errors.angle, 0.0, 1e-20);
        EXPECT_NEAR(row.errors.range, 0.0, 1e-16);
        EXPECT_NEAR(row.errors.velocity, 0.0, 1e-16);
    }
    EXPECT_NEAR(r.find(0.0, EstimatorKind::joint).rmse_range_m, 0.0, 1e-8);
}

TEST(Sweep, ByteIdenticalAcrossRunsAndWorkerCounts) {
    auto cfg = parse(R"({"sweep_variable": "tx_power_dbm", "sweep_values": [20, 30], "trials": 6, "seed": 4})");
    const auto a = trials_csv(run_sweep(cfg));
    const auto b = trials_csv(run_sweep(cfg));
    cfg.workers = 3;
    const auto c = trials_csv(run_sweep(cfg));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 1 + 2 * 6 * 3);

    cfg.seed = 5;
    EXPECT_NE(trials_csv(run_sweep(cfg)), a);
}

TEST(Sweep, AddingASweepPointKeepsEarlierPoints) {
    auto cfg = parse(R"({"sweep_variable": "tx_power_dbm", "sweep_values": [25], "trials": 4, "estimators": ["joint"]})");
    const auto one = run_sweep(cfg);
    cfg.sweep_values = {25, 35};
    const auto two = run_sweep(cfg);
    for (std::size_t k = 0; k < one.rows.size(); ++k) {
        EXPECT_EQ(one.rows[k].truth[0].range, two.rows[k].truth[0].range);
        EXPECT_EQ(one.rows[k].estimates.items[0].bin, two.rows[k].estimates.items[0].bin);
    }
}

TEST(Sweep, RmseDecreasesWithPower) {
    auto cfg = parse(R"({"sweep_variable": "tx_power_dbm", "sweep_values": [0, 10, 20, 30, 40],
                         "trials": 60, "estimators": ["joint"]})");
    const auto r = run_sweep(cfg);
    int ok = 0, pairs = 0;
    for (auto dim : {&SummaryRow::rmse_angle_deg, &SummaryRow::rmse_range_m, &SummaryRow::rmse_velocity_mps})
        for (std::size_t k = 0; k + 1 < r.summary.size(); ++k, ++pairs)
            ok += r.summary[k + 1].*dim <= r.summary[k].*dim;
    EXPECT_GT(2 * ok, pairs);
}

TEST(Sweep, ScalingBeatsNoScalingOnAngle) {
    auto cfg = parse(R"({"P_tx_dbm": 35, "trials": 100, "estimators": ["joint", "joint_no_scaling"]})");
    const auto r = run_sweep(cfg);
    EXPECT_LT(r.find(0.0, EstimatorKind::joint).rmse_angle_deg,
              r.find(0.0, EstimatorKind::joint_no_scaling).rmse_angle_deg);
}

TEST(Sweep, NoScalingIdenticalForConstantModulusSingleAntenna) {
    auto cfg = SystemConfig::desk_scale();
    cfg.num_tx = 1;
    const auto tx = testutil::qpsk_single(cfg, 2);
    Rng rng(3);
    for (int k = 0; k < 10; ++k) {
        const Target t = testutil::on_grid(cfg, 5 - k, -10 - 7 * k, 3 * k - 10);
        const auto y = simulate_echo_cube(cfg, std::span(&t, 1), tx, true, 60 + k);
        const auto a = estimate_joint(y, tx, cfg, 1, {true}).estimates;
        const auto b = estimate_joint(y, tx, cfg, 1, {false}).estimates;
        EXPECT_EQ(a.items[0].bin, b.items[0].bin);
    }
}

TEST(Sweep, TrialsCsvColumns) {
    auto cfg = parse(R"({"trials": 2, "record_timing": false})");
    const auto text = trials_csv(run_sweep(cfg));
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "sweep_value,trial,estimator,rmse_angle_deg,rmse_range_m,rmse_velocity_mps,mean_peak_mag,clamp_count,"
              "wall_ms");
    const auto m = manifest(cfg, run_sweep(cfg));
    EXPECT_EQ(m["config"]["trials"], 2);
}

TEST(Analyze, ReportValues) {
    auto cfg = parse(R"({"N_r": 16, "N_t": 16, "N_s": 512, "L": 256, "dft_padding": 0,
                         "N_a": 48, "N_d": 1536, "N_v": 768})");
    const auto rep = analyze(cfg, false);
    EXPECT_NEAR(rep.limits.range_max, 1250.0, 1e-9);
    EXPECT_NEAR(rep.res.range, 2.44140625, 1e-12);
    EXPECT_NEAR(linear_to_db(rep.gain_bound), 63.2163, 1e-4);
    std::ostringstream os;
    print_report(os, rep);
    EXPECT_NE(os.str().find("1250"), std::string::npos);
}

TEST(RadarImage, ZeroCubeAndSingleCell) {
    const auto cfg = SystemConfig::desk_scale();
    RadarCube cube{CTensor(cfg.fft_angle, cfg.fft_delay, cfg.fft_doppler)};
    auto img = export_radar_image(cube, AxisPair::angle_range, cfg);
    EXPECT_EQ(img.rows.size(), cfg.fft_angle);
    EXPECT_EQ(img.cols.size(), cfg.fft_delay);
    for (double v : img.values) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(std::is_sorted(img.rows.begin(), img.rows.end()));
    EXPECT_TRUE(std::is_sorted(img.cols.begin(), img.cols.end()));

    const Target t = testutil::on_grid(cfg, -4, -33, 12);
    const std::vector<double> dirs{t.theta};
    const auto tx = testutil::zf_tx(cfg, dirs, 6);
    const auto y = simulate_echo_cube(cfg, std::span(&t, 1), tx, false, 0);
    const auto joint = estimate_joint(y, tx, cfg, 1);
    for (auto pair : {AxisPair::angle_range, AxisPair::angle_velocity, AxisPair::range_velocity}) {
        img = export_radar_image(joint.cube, pair, cfg);
        const auto best = std::max_element(img.values.begin(), img.values.end()) - img.values.begin();
        const double row = img.rows[best / img.cols.size()], col = img.cols[best % img.cols.size()];
        const double angle = rad_to_deg(t.theta);
        switch (pair) {
            case AxisPair::angle_range:
                EXPECT_NEAR(row, angle, 1e-9);
                EXPECT_NEAR(col, t.range, 1e-9);
                break;
            case AxisPair::angle_velocity:
                EXPECT_NEAR(row, angle, 1e-9);
                EXPECT_NEAR(col, t.velocity, 1e-9);
                break;
            case AxisPair::range_velocity:
                EXPECT_NEAR(row, t.range, 1e-9);
                EXPECT_NEAR(col, t.velocity, 1e-9);
                break;
        }
    }
    std::ostringstream os;
    write_image_csv(os, img);
    EXPECT_EQ(os.str().substr(0, os.str().find(',')), "range_m\\velocity_mps");
    EXPECT_THROW(parse_axis_pair("range-angle"), Error);
}

TEST(TensorIo, RoundTripAndCorruption) {
    const auto t = testutil::random_tensor(3, 4, 5, 1);
    std::stringstream ss;
    io::write_tensor(ss, t);
    EXPECT_EQ(ss.str().size(), 16u + 16u * 60u);
    EXPECT_EQ(io::read_tensor(ss), t);

    std::stringstream bad("XXXXXXXXXXXXXXXX");
    EXPECT_THROW(io::read_tensor(bad), Error);
    std::stringstream cut;
    io::write_tensor(cut, t);
    std::string s = cut.str();
    s.resize(s.size() - 8);
    std::stringstream truncated(s);
    EXPECT_THROW(io::read_tensor(truncated), Error);
}
