// SPDX-License-Identifier: Apache-2.0
//
// Transmit side: QAM symbols, zero-forcing precoders toward users and sensing
// directions, the precoded frequency-domain tensor x(n, i, l) and the
// per-user received signal used to check interference suppression.

#ifndef ISAC_TXGEN_HPP
#define ISAC_TXGEN_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "isac/core.hpp"
#include "isac/rng.hpp"

namespace isac {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Unit-average-power square QAM alphabet, row-major over (I, Q) levels.
inline std::vector<cplx> qam_constellation(int order) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
    if (order < 4 || side * side != order || (side & (side - 1)) != 0)
        throw Error("qam_constellation: order must be a square power of two (4, 16, 64, 256)");
    // Levels +-1, +-3, ..., average energy 2 (M - 1) / 3.
    const double norm = std::sqrt(2.0 * (order - 1) / 3.0);
    std::vector<cplx> points;
    points.reserve(order);
    for (int a = 0; a < side; ++a)
        for (int b = 0; b < side; ++b)
            points.emplace_back((2 * a - side + 1) / norm, (2 * b - side + 1) / norm);
    return points;
}

/// Symbols s(k, i, l), streams x N_s x L, drawn uniformly from the alphabet.
inline CTensor gen_qam_symbols(std::size_t streams, std::size_t num_subcarriers,
                               std::size_t num_symbols, int order, std::uint64_t seed) {
    if (order != 4 && order != 16 && order != 64 && order != 256)
        throw Error("gen_qam_symbols: unsupported QAM order " + std::to_string(order));
    const auto alphabet = qam_constellation(order);
    Rng rng(seed);
    CTensor s(streams, num_subcarriers, num_symbols);
    for (auto& v : s.flat()) v = alphabet[rng.below(alphabet.size())];
    return s;
}

/// h(k, i, :) is the length-N_t channel vector h_{i,k} of user k on subcarrier i.
struct CommChannel {
    CTensor h;  // K x N_s x N_t

    std::size_t num_users() const { return h.extent(0); }
    std::size_t num_subcarriers() const { return h.extent(1); }
    std::size_t num_tx() const { return h.extent(2); }

    CVector vector(std::size_t k, std::size_t i) const {
        CVector v(num_tx());
        for (std::size_t n = 0; n < num_tx(); ++n) v(n) = h(k, i, n);
        return v;
    }
};

/// i.i.d. CN(0, 1) entries; `frequency_flat` reuses subcarrier 0 everywhere.
inline CommChannel random_comm_channel(std::size_t users, std::size_t num_subcarriers,
                                       std::size_t num_tx, std::uint64_t seed,
                                       bool frequency_flat = false) {
    Rng rng(seed);
    CommChannel ch{CTensor(users, num_subcarriers, num_tx)};
    for (std::size_t k = 0; k < users; ++k)
        for (std::size_t i = 0; i < num_subcarriers; ++i)
            for (std::size_t n = 0; n < num_tx; ++n)
                ch.h(k, i, n) = (frequency_flat && i > 0) ? ch.h(k, 0, n) : rng.complex_normal(1.0);
    return ch;
}

/// W_i for every subcarrier; columns 0..K-1 serve users, the rest point at
/// sensing directions.
struct PrecoderSet {
    std::vector<CMatrix> per_subcarrier;  // each N_t x (K + S)
    std::size_t num_users = 0;
    std::size_t num_sensing = 0;

    std::size_t num_streams() const { return num_users + num_sensing; }
    std::size_t num_subcarriers() const { return per_subcarrier.size(); }
};

class SingularConfiguration : public Error {
public:
    using Error::Error;
};

/// Zero-forcing precoder. Per subcarrier the effective channel stacks the user
/// rows h_{i,k}^H and one virtual row a^H(omega_t(phi)) per sensing direction;
/// W_i is its pseudo-inverse with every column rescaled to its power share.
///
/// `sensing_fraction` < 0 splits P_tx equally over all columns; otherwise the
/// sensing columns share sensing_fraction * P_tx and the users the rest.
inline PrecoderSet zf_precoder(const CommChannel& channel, std::span<const double> sense_dirs,
                               const SystemConfig& cfg, double sensing_fraction = -1.0) {
    const std::size_t users = channel.num_users();
    const std::size_t sensing = sense_dirs.size();
    const std::size_t streams = users + sensing;
    const std::size_t nt = cfg.num_tx;
    if (users > 0 && channel.num_tx() != nt) throw Error("zf_precoder: channel N_t mismatch");
    if (streams > nt)
        throw SingularConfiguration("zf_precoder: K + sensing directions exceeds N_t");
    if (users > 0 && channel.num_subcarriers() != cfg.num_subcarriers)
        throw Error("zf_precoder: channel N_s mismatch");

    std::vector<double> share(streams, streams ? cfg.tx_power / static_cast<double>(streams) : 0.0);
    if (sensing_fraction >= 0.0 && streams > 0) {
        if (sensing_fraction > 1.0) throw Error("zf_precoder: sensing fraction must be <= 1");
        for (std::size_t s = 0; s < streams; ++s) {
            if (s < users)
                share[s] = sensing > 0 ? (1.0 - sensing_fraction) * cfg.tx_power / users
                                       : cfg.tx_power / users;
            else
                share[s] = users > 0 ? sensing_fraction * cfg.tx_power / sensing
                                     : cfg.tx_power / sensing;
        }
    }

    std::vector<CVector> sense_rows;
    for (double phi : sense_dirs) {
        const auto a = steering_vector(omega_t(phi, cfg), nt);
        sense_rows.emplace_back(Eigen::Map<const CVector>(a.data(), nt).conjugate());
    }

    PrecoderSet out;
    out.num_users = users;
    out.num_sensing = sensing;
    out.per_subcarrier.resize(cfg.num_subcarriers);
    for (std::size_t i = 0; i < cfg.num_subcarriers; ++i) {
        CMatrix heff(streams, nt);
        for (std::size_t k = 0; k < users; ++k) heff.row(k) = channel.vector(k, i).adjoint();
        for (std::size_t s = 0; s < sensing; ++s) heff.row(users + s) = sense_rows[s].transpose();

        CMatrix w(nt, streams);
        if (streams > 0) {
            Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(heff);
            cod.setThreshold(1e-10);
            if (static_cast<std::size_t>(cod.rank()) < streams)
                throw SingularConfiguration("zf_precoder: effective channel is rank deficient on subcarrier " +
                                            std::to_string(i));
            w = cod.pseudoInverse();
            for (std::size_t s = 0; s < streams; ++s) {
                const double nrm = w.col(s).norm();
                w.col(s) *= std::sqrt(share[s]) / nrm;
            }
        }
        out.per_subcarrier[i] = std::move(w);
    }
    return out;
}

struct TxSignal {
    CTensor x;  // N_t x N_s x L
    PrecoderSet precoders;
    CTensor symbols;  // streams x N_s x L

    std::size_t num_tx() const { return x.extent(0); }
    std::size_t num_subcarriers() const { return x.extent(1); }
    std::size_t num_symbols() const { return x.extent(2); }

    /// x_i[l] as a contiguous vector.
    std::vector<cplx> column(std::size_t i, std::size_t l) const {
        std::vector<cplx> v(num_tx());
        for (std::size_t n = 0; n < num_tx(); ++n) v[n] = x(n, i, l);
        return v;
    }
};

/// x_i[l] = W_i s_i[l] for every (i, l).
inline TxSignal assemble_tx(PrecoderSet precoders, CTensor symbols) {
    const std::size_t ns = symbols.extent(1), len = symbols.extent(2);
    if (precoders.num_subcarriers() != ns) throw Error("assemble_tx: subcarrier count mismatch");
    if (symbols.extent(0) != precoders.num_streams()) throw Error("assemble_tx: stream count mismatch");
    const std::size_t nt = ns > 0 ? static_cast<std::size_t>(precoders.per_subcarrier[0].rows()) : 0;
    for (const auto& w : precoders.per_subcarrier)
        if (static_cast<std::size_t>(w.rows()) != nt || static_cast<std::size_t>(w.cols()) != symbols.extent(0))
            throw Error("assemble_tx: precoder shape mismatch");

    TxSignal tx{CTensor(nt, ns, len), std::move(precoders), std::move(symbols)};
    const std::size_t streams = tx.symbols.extent(0);
    CVector s(streams);
    for (std::size_t i = 0; i < ns; ++i) {
        const CMatrix& w = tx.precoders.per_subcarrier[i];
        for (std::size_t l = 0; l < len; ++l) {
            for (std::size_t k = 0; k < streams; ++k) s(k) = tx.symbols(k, i, l);
            const CVector xv = w * s;
            for (std::size_t n = 0; n < nt; ++n) tx.x(n, i, l) = xv(n);
        }
    }
    return tx;
}

/// A transmit tensor without precoder bookkeeping (e.g. loaded from file or
/// constructed directly in tests).
inline TxSignal raw_tx(CTensor x) {
    TxSignal tx;
    tx.x = std::move(x);
    return tx;
}

/// y_{i,k}[l] = h_{i,k}^H W_i s_i[l] + z_{i,k}[l]; returns K x N_s x L.
inline CTensor comm_rx(const CommChannel& channel, const TxSignal& tx, double sigma_c_sq,
                       std::uint64_t seed, bool noise_on = true) {
    const std::size_t users = channel.num_users();
    const std::size_t ns = tx.num_subcarriers(), len = tx.num_symbols(), nt = tx.num_tx();
    if (channel.num_subcarriers() != ns || channel.num_tx() != nt)
        throw Error("comm_rx: channel shape does not match the transmit tensor");
    Rng rng(seed);
    CTensor y(users, ns, len);
    for (std::size_t k = 0; k < users; ++k)
        for (std::size_t i = 0; i < ns; ++i)
            for (std::size_t l = 0; l < len; ++l) {
                cplx acc{};
                for (std::size_t n = 0; n < nt; ++n) acc += std::conj(channel.h(k, i, n)) * tx.x(n, i, l);
                if (noise_on) acc += rng.complex_normal(sigma_c_sq);
                y(k, i, l) = acc;
            }
    return y;
}

}  // namespace isac

#endif  // ISAC_TXGEN_HPP
