#include <gtest/gtest.h>

#include <cmath>

#include "isac/txgen.hpp"

using namespace isac;

TEST(Qam, UnitPowerZeroMean) {
    for (int order : {4, 16, 64, 256}) {
        const auto pts = qam_constellation(order);
        ASSERT_EQ(pts.size(), static_cast<std::size_t>(order));
        double p = 0.0;
        cplx m{};
        for (auto v : pts) {
            p += std::norm(v);
            m += v;
        }
        EXPECT_NEAR(p / order, 1.0, 1e-12);
        EXPECT_NEAR(std::abs(m), 0.0, 1e-12);
    }
    EXPECT_THROW(qam_constellation(8), Error);
    EXPECT_THROW(gen_qam_symbols(1, 1, 1, 32, 0), Error);
}

TEST(Qam, EmpiricalMoments) {
    const auto s = gen_qam_symbols(1, 1000, 100, 16, 42);
    cplx mean{};
    double power = 0.0;
    for (auto v : s.flat()) {
        mean += v;
        power += std::norm(v);
    }
    const double n = static_cast<double>(s.size());
    EXPECT_LT(std::abs(mean / n), 3.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(power / n, 1.0, 0.01);
}

TEST(Qam, DeterministicSymbols) {
    EXPECT_EQ(gen_qam_symbols(3, 8, 4, 16, 9), gen_qam_symbols(3, 8, 4, 16, 9));
    EXPECT_NE(gen_qam_symbols(3, 8, 4, 16, 9), gen_qam_symbols(3, 8, 4, 16, 10));
}

namespace {

SystemConfig small_cfg(std::size_t nt, std::size_t ns) {
    auto cfg = SystemConfig::desk_scale();
    cfg.num_tx = nt;
    cfg.num_subcarriers = ns;
    cfg.tx_power = 2.5;
    return cfg;
}

}  // namespace

TEST(ZeroForcing, IdentityChannel) {
    auto cfg = small_cfg(4, 3);
    cfg.num_users = 4;
    CommChannel ch{CTensor(4, 3, 4)};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 4; ++k) ch.h(k, i, k) = 1.0;
    const auto w = zf_precoder(ch, {}, cfg);
    for (const auto& wi : w.per_subcarrier) {
        const CMatrix expect = CMatrix::Identity(4, 4) * std::sqrt(cfg.tx_power / 4);
        EXPECT_LT((wi - expect).norm(), 1e-12);
    }
}

TEST(ZeroForcing, DiagonalEffectiveChannelWithSensingRows) {
    auto cfg = small_cfg(16, 8);
    const auto ch = random_comm_channel(2, 8, 16, 3);
    const std::vector<double> dirs{deg_to_rad(20.0), deg_to_rad(-35.0)};
    const auto w = zf_precoder(ch, dirs, cfg);
    ASSERT_EQ(w.num_streams(), 4u);
    for (std::size_t i = 0; i < 8; ++i) {
        CMatrix heff(4, 16);
        for (std::size_t k = 0; k < 2; ++k) heff.row(k) = ch.vector(k, i).adjoint();
        for (std::size_t s = 0; s < 2; ++s) {
            const auto a = steering_vector(omega_t(dirs[s], cfg), 16);
            for (std::size_t n = 0; n < 16; ++n) heff(2 + s, n) = std::conj(a[n]);
        }
        const CMatrix g = heff * w.per_subcarrier[i];
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) {
                if (r == c) {
                    EXPECT_GT(g(r, c).real(), 0.0);
                    EXPECT_NEAR(g(r, c).imag(), 0.0, 1e-9);
                } else {
                    EXPECT_LT(std::abs(g(r, c)), 1e-9);
                }
            }
        EXPECT_NEAR(w.per_subcarrier[i].squaredNorm(), cfg.tx_power, 1e-6 * cfg.tx_power);
    }
}

TEST(ZeroForcing, SensingFractionSplit) {
    auto cfg = small_cfg(8, 2);
    const auto ch = random_comm_channel(2, 2, 8, 5);
    const std::vector<double> dirs{0.2};
    const auto w = zf_precoder(ch, dirs, cfg, 0.4);
    for (const auto& wi : w.per_subcarrier) {
        EXPECT_NEAR(wi.col(0).squaredNorm(), 0.3 * cfg.tx_power, 1e-12);
        EXPECT_NEAR(wi.col(1).squaredNorm(), 0.3 * cfg.tx_power, 1e-12);
        EXPECT_NEAR(wi.col(2).squaredNorm(), 0.4 * cfg.tx_power, 1e-12);
    }
}

TEST(ZeroForcing, SingularConfigurations) {
    auto cfg = small_cfg(2, 1);
    // two identical sensing directions -> rank 1
    const std::vector<double> same{0.1, 0.1};
    EXPECT_THROW(zf_precoder(CommChannel{}, same, cfg), SingularConfiguration);
    // more streams than antennas
    const auto ch = random_comm_channel(2, 1, 2, 1);
    const std::vector<double> one{0.3};
    EXPECT_THROW(zf_precoder(ch, one, cfg), SingularConfiguration);
}

TEST(ZeroForcing, AveragePowerMatchesBudget) {
    // E||W s||^2 = ||W||_F^2 = P_tx for unit-power symbols
    auto cfg = small_cfg(8, 16);
    cfg.num_symbols = 400;
    const auto ch = random_comm_channel(2, 16, 8, 8);
    const std::vector<double> dirs{0.25};
    auto pre = zf_precoder(ch, dirs, cfg);
    const auto tx = assemble_tx(pre, gen_qam_symbols(3, 16, 400, 16, 2));
    double p = 0.0;
    for (auto v : tx.x.flat()) p += std::norm(v);
    EXPECT_NEAR(p / (16 * 400), cfg.tx_power, 0.03 * cfg.tx_power);
}

TEST(Assemble, Examples) {
    PrecoderSet id;
    id.num_users = 2;
    id.per_subcarrier = {CMatrix::Identity(2, 2), CMatrix::Identity(2, 2)};
    CTensor s(2, 2, 3, cplx(0.5, -1));
    const auto tx = assemble_tx(id, s);
    for (auto v : tx.x.flat()) EXPECT_EQ(v, cplx(0.5, -1));

    PrecoderSet single;
    single.num_users = 1;
    single.per_subcarrier = {CMatrix::Constant(1, 1, std::sqrt(2.0))};
    CTensor s1(1, 1, 4);
    for (int l = 0; l < 4; ++l) s1(0, 0, l) = cplx(l, 1);
    const auto tx1 = assemble_tx(single, s1);
    for (int l = 0; l < 4; ++l) EXPECT_NEAR(std::abs(tx1.x(0, 0, l) - std::sqrt(2.0) * cplx(l, 1)), 0, 1e-15);

    PrecoderSet half;
    half.num_users = 2;
    half.per_subcarrier = {CMatrix::Identity(2, 2) / std::sqrt(2.0)};
    CTensor s2(2, 1, 1);
    s2(0, 0, 0) = {1, 1};
    s2(1, 0, 0) = {1, -1};
    const auto tx2 = assemble_tx(half, s2);
    EXPECT_NEAR(std::abs(tx2.x(0, 0, 0) - cplx(1, 1) / std::sqrt(2.0)), 0, 1e-15);
    EXPECT_NEAR(std::abs(tx2.x(1, 0, 0) - cplx(1, -1) / std::sqrt(2.0)), 0, 1e-15);

    CTensor wrong(3, 2, 3);
    EXPECT_THROW(assemble_tx(id, wrong), Error);
}

TEST(CommRx, InterferenceFreeUnderZeroForcing) {
    auto cfg = small_cfg(8, 4);
    cfg.num_symbols = 6;
    const auto ch = random_comm_channel(3, 4, 8, 17);
    const std::vector<double> dirs{-0.4};
    auto pre = zf_precoder(ch, dirs, cfg);
    const auto s = gen_qam_symbols(4, 4, 6, 16, 4);
    const auto tx = assemble_tx(pre, s);
    const auto y = comm_rx(ch, tx, cfg.comm_noise_power, 0, false);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 4; ++i) {
            const cplx g = y(k, i, 0) / s(k, i, 0);
            EXPECT_GT(g.real(), 0.0);
            EXPECT_NEAR(g.imag(), 0.0, 1e-9);
            for (std::size_t l = 0; l < 6; ++l) EXPECT_NEAR(std::abs(y(k, i, l) - g * s(k, i, l)), 0.0, 1e-9);
        }
}

TEST(CommRx, ZeroChannelAndZeroPrecoder) {
    auto cfg = small_cfg(2, 50);
    cfg.num_symbols = 1000;
    CommChannel zero{CTensor(1, 50, 2)};
    PrecoderSet w;
    w.num_users = 1;
    w.per_subcarrier.assign(50, CMatrix::Zero(2, 1));
    const auto tx = assemble_tx(w, gen_qam_symbols(1, 50, 1000, 4, 1));
    const auto quiet = comm_rx(zero, tx, 1e-9, 3, false);
    for (auto v : quiet.flat()) EXPECT_EQ(v, cplx(0, 0));
    const auto noisy = comm_rx(zero, tx, 1e-9, 3, true);
    double p = 0.0;
    for (auto v : noisy.flat()) p += std::norm(v);
    EXPECT_NEAR(p / static_cast<double>(noisy.size()), 1e-9, 0.05e-9);
}
