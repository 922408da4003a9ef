// SPDX-License-Identifier: Apache-2.0
//
// Thin FFTW wrapper: batched in-place 1-D transforms along one axis of a
// strided buffer. Plans are cached per geometry; planning is serialized, plan
// execution is thread-safe (new-array execute on an FFTW_UNALIGNED plan).

#ifndef ISAC_FFT_HPP
#define ISAC_FFT_HPP

#include <fftw3.h>

#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "isac/core.hpp"

namespace isac::fft {

enum class Sign : int { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

namespace detail {

struct PlanKey {
    int n, howmany, stride, dist, sign;
    auto tie() const { return std::tie(n, howmany, stride, dist, sign); }
    bool operator<(const PlanKey& o) const { return tie() < o.tie(); }
};

class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(const PlanKey& key, fftw_complex* buffer) {
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        int n = key.n;
        fftw_plan plan = fftw_plan_many_dft(1, &n, key.howmany, buffer, nullptr, key.stride, key.dist,
                                            buffer, nullptr, key.stride, key.dist, key.sign,
                                            FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!plan) throw Error("FFTW failed to create a plan");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<PlanKey, fftw_plan> plans_;
};

inline PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

}  // namespace detail

/// Unnormalized in-place DFT of `howmany` length-`n` sequences. Sequence j
/// starts at base[j * dist] with element stride `stride`.
/// forward: X[k] = sum_m x[m] e^{-j 2 pi m k / n}; backward flips the sign.
inline void transform(cplx* base, std::size_t n, std::size_t howmany, std::size_t stride,
                      std::size_t dist, Sign sign) {
    if (n == 0 || howmany == 0) return;
    auto* buf = reinterpret_cast<fftw_complex*>(base);
    const detail::PlanKey key{static_cast<int>(n), static_cast<int>(howmany), static_cast<int>(stride),
                              static_cast<int>(dist), static_cast<int>(sign)};
    fftw_plan plan = detail::plan_cache().get(key, buf);
    fftw_execute_dft(plan, buf, buf);
}

/// Out-of-place convenience for a single contiguous sequence, zero-padded to n.
inline std::vector<cplx> dft(std::span<const cplx> x, std::size_t n, Sign sign = Sign::forward) {
    if (n < x.size()) throw Error("dft: length shorter than input");
    std::vector<cplx> out(n);
    std::copy(x.begin(), x.end(), out.begin());
    transform(out.data(), n, 1, 1, n, sign);
    return out;
}

}  // namespace isac::fft

#endif  // ISAC_FFT_HPP
