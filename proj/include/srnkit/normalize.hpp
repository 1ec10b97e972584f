#ifndef SRNKIT_NORMALIZE_HPP
#define SRNKIT_NORMALIZE_HPP

//
// Spectral and stable rank normalizers: closed-form solution with optional
// spectrum preservation, the greedy deflation variant, and the cheap
// per-training-step form.
//

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "srnkit/matrix.hpp"
#include "srnkit/power.hpp"
#include "srnkit/svd.hpp"

namespace srnkit {

struct SrnConfig {
    // Target stable rank, either absolute (r >= 1) or as a ratio c in (0,1]
    // resolved against min(m, n). Exactly one should be set.
    double target_stable_rank = 0.0;
    double stable_rank_ratio = 0.0;
    int partition_index = 0;  // k; 0 drops the spectrum preservation constraint

    double tol = 1e-9;
    int max_iter = 1000;
    std::uint64_t seed = 0;

    double resolve_rank(std::size_t rows, std::size_t cols) const {
        double r = target_stable_rank;
        if (stable_rank_ratio > 0.0) {
            if (stable_rank_ratio > 1.0)
                throw DimensionMismatch("stable rank ratio must be in (0,1]");
            r = stable_rank_ratio * static_cast<double>(std::min(rows, cols));
        }
        if (r < 1.0) throw DimensionMismatch("target stable rank must be >= 1");
        return r;
    }
};

struct SrnResult {
    DenseMatrix matrix;
    int preserved_count = 0;  // l: leading singular values preserved exactly
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    bool was_noop = false;
};

inline double stable_rank(const DenseMatrix& w) {
    const auto f = svd(w);
    if (f.sigma.empty() || f.sigma[0] == 0.0) throw ZeroMatrixError();
    double s = 0.0;
    for (double x : f.sigma) s += x * x;
    return s / (f.sigma[0] * f.sigma[0]);
}

// Frobenius-nearest matrix whose spectral norm does not exceed s: every
// singular value is clipped at s, vectors untouched.
inline DenseMatrix spectral_normalize_optimal(const DenseMatrix& w, double s) {
    if (s <= 0.0) throw DimensionMismatch("spectral cap must be positive");
    SvdFactors f = svd(w);
    if (!f.sigma.empty() && f.sigma[0] <= s) return w;
    for (double& x : f.sigma) x = std::min(x, s);
    return f.reconstruct();
}

// One power-iteration refinement, then divide by the current estimate
// u^T W v (the training-time approximation of dividing by sigma_1).
inline std::pair<DenseMatrix, PowerIterState> spectral_normalize_approx(const DenseMatrix& w,
                                                                        PowerIterState state) {
    if (frobenius_norm(w) == 0.0) throw ZeroMatrixError();
    power_refine(w, state);
    return {scaled(w, 1.0 / state.sigma_estimate), state};
}

namespace detail {

// S1 = sum_{i<=max(1,k)} sigma_i u_i v_i^T from precomputed factors.
inline DenseMatrix spectrum_head(const SvdFactors& f, int count) {
    DenseMatrix s1(f.u.rows(), f.v.rows());
    for (int i = 0; i < count; ++i)
        for (std::size_t r = 0; r < s1.rows(); ++r)
            for (std::size_t c = 0; c < s1.cols(); ++c)
                s1(r, c) += f.sigma[i] * f.u(r, i) * f.v(c, i);
    return s1;
}

inline SrnResult srn_from_factors(const DenseMatrix& w, const SvdFactors& f, double r, int k) {
    const double sigma1 = f.sigma[0];
    double fro2 = 0.0;
    for (double x : f.sigma) fro2 += x * x;
    const double srank = fro2 / (sigma1 * sigma1);

    if (srank <= r + 1e-12) {
        SrnResult res;
        res.matrix = w;
        res.was_noop = true;
        return res;
    }

    const int head = std::max(1, k);
    DenseMatrix s1 = spectrum_head(f, head);
    DenseMatrix s2 = add_scaled(w, -1.0, s1);
    double s1f2 = 0.0;
    for (int i = 0; i < head; ++i) s1f2 += f.sigma[i] * f.sigma[i];
    const double s2f = std::sqrt(std::max(0.0, fro2 - s1f2));

    SrnResult res;
    res.preserved_count = head;
    if (k == 0) {
        if (r == 1.0) {
            res.gamma1 = 1.0;
            res.gamma2 = 0.0;
        } else {
            const double gamma = std::sqrt(r - 1.0) * sigma1 / s2f;
            res.gamma2 = (gamma + r - 1.0) / r;
            res.gamma1 = res.gamma2 / gamma;
        }
    } else {
        if (r < s1f2 / (sigma1 * sigma1))
            throw InfeasibleError("target stable rank below ||S1||_F^2 / sigma_1^2");
        res.gamma1 = 1.0;
        res.gamma2 = std::sqrt(r * sigma1 * sigma1 - s1f2) / s2f;
    }
    res.matrix = add_scaled(scaled(s1, res.gamma1), res.gamma2, s2);
    return res;
}

}  // namespace detail

// Exact solution of the stable rank normalization problem via full SVD.
inline SrnResult srn_closed_form(const DenseMatrix& w, const SrnConfig& cfg) {
    if (frobenius_norm(w) == 0.0) throw ZeroMatrixError();
    const double r = cfg.resolve_rank(w.rows(), w.cols());
    const SvdFactors f = svd(w);
    return detail::srn_from_factors(w, f, r, cfg.partition_index);
}

// Greedy variant: admits singular values one at a time via deflated power
// iteration while r >= (sigma_i^2 + eta) / sigma_1^2, then rescales the tail.
inline SrnResult srn_greedy(const DenseMatrix& w, const SrnConfig& cfg) {
    const double fro = frobenius_norm(w);
    if (fro == 0.0) throw ZeroMatrixError();
    if (cfg.partition_index < 1) throw DimensionMismatch("srn_greedy requires k >= 1");
    const double r = cfg.resolve_rank(w.rows(), w.cols());

    DenseMatrix s1(w.rows(), w.cols());
    DenseMatrix residual = w;
    double beta = fro * fro;
    double eta = 0.0;
    double sigma1 = 0.0;
    int l = 0;
    for (int i = 0; i < cfg.partition_index; ++i) {
        PowerIterState s = power_iteration_top(residual, cfg.tol, cfg.max_iter, cfg.seed + i);
        const double sig = s.sigma_estimate;
        if (i == 0) {
            sigma1 = sig;
            // same noop semantics as the closed form
            if (beta / (sigma1 * sigma1) <= r + 1e-12) {
                SrnResult res;
                res.matrix = w;
                res.was_noop = true;
                return res;
            }
        }
        if (r < (sig * sig + eta) / (sigma1 * sigma1)) break;
        for (std::size_t rr = 0; rr < w.rows(); ++rr)
            for (std::size_t cc = 0; cc < w.cols(); ++cc) {
                const double t = sig * s.u[rr] * s.v[cc];
                s1(rr, cc) += t;
                residual(rr, cc) -= t;
            }
        eta += sig * sig;
        beta -= sig * sig;
        ++l;
    }
    eta = r * sigma1 * sigma1 - eta;

    SrnResult res;
    res.preserved_count = l;
    res.gamma1 = 1.0;
    res.gamma2 = std::sqrt(std::max(0.0, eta / beta));
    res.matrix = add_scaled(s1, res.gamma2, add_scaled(w, -1.0, s1));
    return res;
}

// Per-step normalizer for a trained layer: one power refinement, spectral
// normalization by the estimate, then tail rescaling so the stable rank does
// not exceed r. The SGD update itself is composed by the trainer.
inline std::pair<DenseMatrix, PowerIterState> srn_layer_step(const DenseMatrix& w, double r,
                                                             PowerIterState state) {
    if (frobenius_norm(w) == 0.0) throw ZeroMatrixError();
    if (r <= 1.0) throw DimensionMismatch("srn_layer_step requires r > 1");
    power_refine(w, state);
    DenseMatrix wf = scaled(w, 1.0 / state.sigma_estimate);
    DenseMatrix tail = add_scaled(wf, -1.0, outer(state.u, state.v));
    const double tail_f = frobenius_norm(tail);
    if (tail_f <= std::sqrt(r - 1.0)) return {wf, state};
    DenseMatrix out = add_scaled(outer(state.u, state.v), std::sqrt(r - 1.0) / tail_f, tail);
    return {out, state};
}

// ||W_hat_k - W||_F for k = 1..k_max; non-decreasing in k.
inline std::vector<double> frobenius_distance_profile(const DenseMatrix& w, double r, int k_max) {
    if (k_max < 1) throw DimensionMismatch("k_max must be >= 1");
    const SvdFactors f = svd(w);
    std::vector<double> out;
    out.reserve(k_max);
    for (int k = 1; k <= k_max; ++k) {
        SrnResult res = detail::srn_from_factors(w, f, r, k);
        out.push_back(frobenius_distance(res.matrix, w));
    }
    return out;
}

}  // namespace srnkit

#endif
