#ifndef SRNKIT_LRLAYER_HPP
#define SRNKIT_LRLAYER_HPP

//
// Virtual low-rank regularizer: reconstruction loss L_c, norm-floor loss L_n,
// their analytic gradients, and the per-step projection of the auxiliary
// parameter.
//

#include <cmath>
#include <vector>

#include "srnkit/matrix.hpp"
#include "srnkit/nystrom.hpp"

namespace srnkit {

struct LrLayerState {
    DenseMatrix w_aux;          // m x m auxiliary parameter
    std::vector<double> bias;   // length m
    int target_rank = 1;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
};

struct LrLosses {
    double lc = 0.0;  // mean squared projection residual
    double ln = 0.0;  // mean |1 - ||a_i|||
};

struct LrGrads {
    DenseMatrix grad_activations;
    DenseMatrix grad_w;
    std::vector<double> grad_b;
};

namespace detail {

inline void check_lr_shapes(const DenseMatrix& activations, const LrLayerState& state) {
    const std::size_t m = state.w_aux.rows();
    if (state.w_aux.cols() != m) throw DimensionMismatch("w_aux must be square");
    if (activations.cols() != m || state.bias.size() != m)
        throw DimensionMismatch("activation width does not match LR layer");
}

}  // namespace detail

// lc = (1/n) sum_i ||W^T (a_i + b) - (a_i + b)||^2
// ln = (1/n) sum_i |1 - ||a_i|||
inline LrLosses lr_losses(const DenseMatrix& activations, const LrLayerState& state) {
    detail::check_lr_shapes(activations, state);
    const std::size_t n = activations.rows();
    const std::size_t m = activations.cols();
    LrLosses out;
    std::vector<double> c(m), r(m);
    for (std::size_t i = 0; i < n; ++i) {
        auto a = activations.row(i);
        for (std::size_t j = 0; j < m; ++j) c[j] = a[j] + state.bias[j];
        r = matvec_t(state.w_aux, c);
        for (std::size_t j = 0; j < m; ++j) r[j] -= c[j];
        out.lc += dot(r, r);
        out.ln += std::abs(1.0 - norm2(a));
    }
    out.lc /= static_cast<double>(n);
    out.ln /= static_cast<double>(n);
    return out;
}

// Gradients of lambda1*L_c + lambda2*L_n. The L_n subgradient at ||a|| = 1
// and at a = 0 is taken as 0.
inline LrGrads lr_grads(const DenseMatrix& activations, const LrLayerState& state) {
    detail::check_lr_shapes(activations, state);
    const std::size_t n = activations.rows();
    const std::size_t m = activations.cols();
    LrGrads g{DenseMatrix(n, m), DenseMatrix(m, m), std::vector<double>(m, 0.0)};

    std::vector<double> c(m), r(m), back(m);
    for (std::size_t i = 0; i < n; ++i) {
        auto a = activations.row(i);
        for (std::size_t j = 0; j < m; ++j) c[j] = a[j] + state.bias[j];
        r = matvec_t(state.w_aux, c);
        for (std::size_t j = 0; j < m; ++j) r[j] -= c[j];

        // d||r||^2/dc = 2 (W - I) r ; dL_c/dW contribution = 2 c r^T
        back = matvec(state.w_aux, r);
        const double sc = 2.0 * state.lambda1 / static_cast<double>(n);
        for (std::size_t j = 0; j < m; ++j) {
            const double gc = sc * (back[j] - r[j]);
            g.grad_activations(i, j) = gc;
            g.grad_b[j] += gc;
        }
        for (std::size_t p = 0; p < m; ++p) {
            const double cp = sc * c[p];
            auto gw = g.grad_w.row(p);
            for (std::size_t q = 0; q < m; ++q) gw[q] += cp * r[q];
        }

        const double an = norm2(a);
        if (an > 0.0 && an != 1.0) {
            const double sn = -state.lambda2 / static_cast<double>(n) *
                              (1.0 - an > 0.0 ? 1.0 : -1.0) / an;
            for (std::size_t j = 0; j < m; ++j) g.grad_activations(i, j) += sn * a[j];
        }
    }
    return g;
}

// w_aux <- P_r(smooth(symmetrize(w_aux - lr * grad_w))); P_r is the exact
// truncated SVD or the Nystrom approximation per flag.
inline LrLayerState lr_project_step(const LrLayerState& state, const DenseMatrix& grad_w,
                                    double lr, bool use_nystrom, const NystromConfig& ncfg) {
    if (!state.w_aux.same_shape(grad_w)) throw DimensionMismatch("grad_w shape mismatch");
    LrLayerState next = state;
    DenseMatrix updated = symmetrize(add_scaled(state.w_aux, -lr, grad_w));
    updated = smooth_spd(updated, ncfg.smoothing_delta, ncfg.smoothing_max_rounds);
    if (use_nystrom) {
        NystromConfig cfg = ncfg;
        cfg.target_rank = state.target_rank;
        next.w_aux = nystrom_lowrank(updated, cfg);
    } else {
        next.w_aux = hard_threshold_rank(updated, state.target_rank);
    }
    return next;
}

}  // namespace srnkit

#endif
