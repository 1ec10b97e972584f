#ifndef SRNKIT_POWER_HPP
#define SRNKIT_POWER_HPP

//
// Power iteration for the dominant singular pair, with deflation for the
// top-k spectrum.
//

#include <cmath>
#include <random>
#include <tuple>
#include <vector>

#include "srnkit/matrix.hpp"

namespace srnkit {

struct PowerIterState {
    std::vector<double> u;  // unit vector, length rows
    std::vector<double> v;  // unit vector, length cols
    double sigma_estimate = 0.0;
    int iterations_used = 0;
    bool converged = false;
};

namespace detail {

inline void normalize_vec(std::vector<double>& x) {
    const double n = norm2(x);
    if (n > 0.0)
        for (double& e : x) e /= n;
}

}  // namespace detail

// Seeded random unit vector of the given length.
inline std::vector<double> random_unit_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> x(n);
    double nrm = 0.0;
    while (nrm == 0.0) {
        for (double& e : x) e = dist(rng);
        nrm = norm2(x);
    }
    for (double& e : x) e /= nrm;
    return x;
}

// One round of v <- W^T u / ||.||, u <- W v / ||.||, sigma <- u^T W v.
inline void power_refine(const DenseMatrix& w, PowerIterState& state) {
    if (state.u.size() != w.rows() || state.v.size() != w.cols())
        throw DimensionMismatch("power iteration state does not match matrix");
    state.v = matvec_t(w, state.u);
    detail::normalize_vec(state.v);
    state.u = matvec(w, state.v);
    detail::normalize_vec(state.u);
    state.sigma_estimate = dot(state.u, matvec(w, state.v));
    ++state.iterations_used;
}

inline PowerIterState make_power_state(const DenseMatrix& w, std::uint64_t seed) {
    PowerIterState s;
    s.u = random_unit_vector(w.rows(), seed);
    s.v.assign(w.cols(), 0.0);
    return s;
}

inline PowerIterState power_iteration_top(const DenseMatrix& w, double tol = 1e-9,
                                          int max_iter = 1000, std::uint64_t seed = 0) {
    if (frobenius_norm(w) == 0.0) throw ZeroMatrixError();
    PowerIterState state = make_power_state(w, seed);
    double prev = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        power_refine(w, state);
        const double cur = state.sigma_estimate;
        if (it > 0 && std::abs(cur - prev) <= tol * std::max(cur, 1e-300)) {
            state.converged = true;
            return state;
        }
        prev = cur;
    }
    state.converged = false;  // caller may still accept the estimate
    return state;
}

// Top-k singular triples by explicit deflation W <- W - sigma u v^T.
inline std::vector<std::tuple<double, std::vector<double>, std::vector<double>>>
power_iteration_topk(const DenseMatrix& w, int k, double tol = 1e-9, int max_iter = 1000,
                     std::uint64_t seed = 0) {
    if (k < 0 || static_cast<std::size_t>(k) > std::min(w.rows(), w.cols()))
        throw DimensionMismatch("k out of range for power_iteration_topk");
    std::vector<std::tuple<double, std::vector<double>, std::vector<double>>> out;
    if (k == 0) return out;
    DenseMatrix residual = w;
    for (int i = 0; i < k; ++i) {
        PowerIterState s = power_iteration_top(residual, tol, max_iter, seed + i);
        out.emplace_back(s.sigma_estimate, s.u, s.v);
        for (std::size_t r = 0; r < residual.rows(); ++r)
            for (std::size_t c = 0; c < residual.cols(); ++c)
                residual(r, c) -= s.sigma_estimate * s.u[r] * s.v[c];
    }
    return out;
}

}  // namespace srnkit

#endif
