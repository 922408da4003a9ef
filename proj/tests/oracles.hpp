// Independent reference implementations used to freeze expected values:
// O(N^2) direct-sum transforms, a term-by-term echo model, and brute-force
// permutation matching. None of these call into the library's kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
constexpr double pi = std::numbers::pi;

/// X[k] = sum_n x[n] exp(sign * j 2 pi k n / N), x zero-padded to N.
inline std::vector<cplx> dft(const std::vector<cplx>& x, std::size_t n, int sign = -1) {
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc{};
        for (std::size_t t = 0; t < x.size(); ++t) {
            const double ph = sign * 2.0 * pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
            acc += x[t] * cplx(std::cos(ph), std::sin(ph));
        }
        out[k] = acc;
    }
    return out;
}

/// Z(kd, kv) = 1/(Ns L) sum_{i,l} y[i][l] e^{+j 2 pi i kd / Nd} e^{-j 2 pi l kv / Nv}
inline std::vector<std::vector<cplx>> range_doppler(const std::vector<std::vector<cplx>>& y, std::size_t nd,
                                                    std::size_t nv) {
    const std::size_t ns = y.size(), len = y.empty() ? 0 : y[0].size();
    std::vector<std::vector<cplx>> out(nd, std::vector<cplx>(nv));
    for (std::size_t kd = 0; kd < nd; ++kd)
        for (std::size_t kv = 0; kv < nv; ++kv) {
            cplx acc{};
            for (std::size_t i = 0; i < ns; ++i)
                for (std::size_t l = 0; l < len; ++l) {
                    const double ph = 2.0 * pi *
                                      (static_cast<double>(i * kd % nd) / static_cast<double>(nd) -
                                       static_cast<double>(l * kv % nv) / static_cast<double>(nv));
                    acc += y[i][l] * std::polar(1.0, ph);
                }
            out[kd][kv] = acc / static_cast<double>(ns * len);
        }
    return out;
}

struct Scatterer {
    double theta, range, velocity;
    cplx beta;
};

struct Physics {
    double fc, df, tsym, dt, dr, c, c0, d0, ple;
};

/// Echo sample straight from the model, one target and one antenna pair at a
/// time: beta sqrt(PL(2d)) (sum_n e^{-j n wt} x_n) e^{j m wr} e^{j i wd} e^{j l wv}.
/// x is indexed [n][i][l].
inline cplx echo_sample(const Physics& p, const std::vector<Scatterer>& scene,
                        const std::vector<std::vector<std::vector<cplx>>>& x, std::size_t m, std::size_t i,
                        std::size_t l) {
    const double lambda = p.c / p.fc;
    cplx total{};
    for (const auto& s : scene) {
        const double wt = 2.0 * pi * p.dt * std::sin(s.theta) / lambda;
        const double wr = -2.0 * pi * p.dr * std::sin(s.theta) / lambda;
        const double wd = -4.0 * pi * p.df * s.range / p.c;
        const double wv = 4.0 * pi * p.tsym * s.velocity * p.fc / p.c;
        const double pl = p.c0 * std::pow(2.0 * s.range / p.d0, -p.ple);
        cplx inner{};
        for (std::size_t n = 0; n < x.size(); ++n)
            inner += std::exp(cplx(0.0, -static_cast<double>(n) * wt)) * x[n][i][l];
        const double ph = static_cast<double>(m) * wr + static_cast<double>(i) * wd + static_cast<double>(l) * wv;
        total += s.beta * std::sqrt(pl) * inner * std::exp(cplx(0.0, ph));
    }
    return total;
}

/// Minimum of sum_r cost[r][assign[r]] over all injective assignments of rows
/// into columns (rows <= cols), or of columns into rows when rows > cols.
inline double min_assignment_cost(const std::vector<std::vector<double>>& cost) {
    const std::size_t rows = cost.size(), cols = rows ? cost[0].size() : 0;
    if (rows == 0 || cols == 0) return 0.0;
    const std::size_t big = std::max(rows, cols), small = std::min(rows, cols);
    std::vector<std::size_t> perm(big);
    for (std::size_t k = 0; k < big; ++k) perm[k] = k;
    double best = std::numeric_limits<double>::infinity();
    do {
        double acc = 0.0;
        for (std::size_t k = 0; k < small; ++k)
            acc += rows <= cols ? cost[k][perm[k]] : cost[perm[k]][k];
        best = std::min(best, acc);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace oracle
