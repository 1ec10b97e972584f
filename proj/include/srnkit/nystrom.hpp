#ifndef SRNKIT_NYSTROM_HPP
#define SRNKIT_NYSTROM_HPP

//
// Hard rank thresholding, ensembled Nystrom approximation for SPSD matrices,
// and the diagonal-shift smoothing used before rank projection.
//

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include "srnkit/matrix.hpp"
#include "srnkit/svd.hpp"

namespace srnkit {

struct NystromConfig {
    int target_rank = 1;      // r
    int sample_count = 0;     // l; 0 resolves to 2r
    int ensemble_runs = 1;    // t
    std::uint64_t seed = 0;
    double smoothing_delta = 0.01;
    int smoothing_max_rounds = 100;

    int resolve_samples() const { return sample_count > 0 ? sample_count : 2 * target_rank; }
};

// Best rank-r approximation (truncated SVD).
inline DenseMatrix hard_threshold_rank(const DenseMatrix& w, int r) {
    if (r < 1 || static_cast<std::size_t>(r) > std::min(w.rows(), w.cols()))
        throw DimensionMismatch("rank out of range for hard_threshold_rank");
    SvdFactors f = svd(w);
    for (std::size_t i = r; i < f.sigma.size(); ++i) f.sigma[i] = 0.0;
    return f.reconstruct();
}

inline DenseMatrix symmetrize(const DenseMatrix& w) {
    if (w.rows() != w.cols()) throw DimensionMismatch("symmetrize needs a square matrix");
    DenseMatrix s(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) s(i, j) = 0.5 * (w(i, j) + w(j, i));
    return s;
}

// W + m*delta*I for the smallest m <= max_rounds passing the probe
// (by default: the SVD converges).
inline DenseMatrix smooth_spd(
    const DenseMatrix& w, double delta, int max_rounds,
    const std::function<bool(const DenseMatrix&)>& probe =
        [](const DenseMatrix& m) { return try_svd(m).has_value(); }) {
    if (w.rows() != w.cols()) throw DimensionMismatch("smooth_spd needs a square matrix");
    DenseMatrix cur = w;
    for (int m = 0; m <= max_rounds; ++m) {
        if (probe(cur)) return cur;
        for (std::size_t i = 0; i < cur.rows(); ++i) cur(i, i) += delta;
    }
    throw SmoothingExhausted("probe still failing after max_rounds diagonal shifts");
}

namespace detail {

inline std::vector<std::size_t> sample_indices(std::size_t n, int l, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < l; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(l);
    return idx;
}

// Single Nystrom run: W_r = C Z_r^+ C^T, assembled as B B^T with
// B = C U_r diag(1/sqrt(sigma)) so the output is symmetric PSD by
// construction.
inline DenseMatrix nystrom_run(const DenseMatrix& w, int r, int l, std::uint64_t seed) {
    const std::size_t n = w.rows();
    const int max_redraws = 8;
    for (int attempt = 0; attempt < max_redraws; ++attempt) {
        auto idx = sample_indices(n, l, seed + 0x9e3779b97f4a7c15ull * attempt);
        DenseMatrix c(n, l);
        for (std::size_t i = 0; i < n; ++i)
            for (int j = 0; j < l; ++j) c(i, j) = w(i, idx[j]);
        DenseMatrix z(l, l);
        for (int i = 0; i < l; ++i)
            for (int j = 0; j < l; ++j) z(i, j) = w(idx[i], idx[j]);

        auto f = try_svd(z);
        if (!f || f->sigma[0] == 0.0) continue;  // degenerate draw, resample

        const double cutoff = 1e-10 * f->sigma[0];
        DenseMatrix b(n, std::min<std::size_t>(r, f->sigma.size()));
        std::size_t used = 0;
        for (std::size_t k = 0; k < b.cols(); ++k) {
            if (f->sigma[k] <= cutoff) break;
            const double inv_sqrt = 1.0 / std::sqrt(f->sigma[k]);
            std::vector<double> uk(l);
            for (int i = 0; i < l; ++i) uk[i] = f->u(i, k) * inv_sqrt;
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (int j = 0; j < l; ++j) s += c(i, j) * uk[j];
                b(i, k) = s;
            }
            ++used;
        }
        DenseMatrix out(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < used; ++k) s += b(i, k) * b(j, k);
                out(i, j) = s;
                out(j, i) = s;
            }
        return out;
    }
    throw DegenerateData("nystrom sampling kept hitting degenerate submatrices");
}

inline int thread_cap() {
    if (const char* env = std::getenv("SRNKIT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 1;
}

}  // namespace detail

// Ensembled Nystrom r-rank approximation of an SPSD matrix: arithmetic mean
// of t independent runs, run i seeded with seed+i.
inline DenseMatrix nystrom_lowrank(const DenseMatrix& w, const NystromConfig& cfg) {
    if (w.rows() != w.cols()) throw NotSymmetricError("nystrom_lowrank needs a square matrix");
    const double scale = std::max(frobenius_norm(w), 1e-300);
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = i + 1; j < w.cols(); ++j)
            if (std::abs(w(i, j) - w(j, i)) > 1e-8 * scale)
                throw NotSymmetricError("input matrix is not symmetric");
    const int l = cfg.resolve_samples();
    if (cfg.target_rank < 1 || cfg.target_rank > l || static_cast<std::size_t>(l) > w.rows())
        throw DimensionMismatch("need 1 <= r <= l <= n in NystromConfig");
    if (cfg.ensemble_runs < 1) throw DimensionMismatch("ensemble_runs must be >= 1");

    std::vector<DenseMatrix> runs(cfg.ensemble_runs);
    const int threads = std::min(detail::thread_cap(), cfg.ensemble_runs);
    if (threads <= 1) {
        for (int t = 0; t < cfg.ensemble_runs; ++t)
            runs[t] = detail::nystrom_run(w, cfg.target_rank, l, cfg.seed + t);
    } else {
        std::vector<std::thread> pool;
        for (int tid = 0; tid < threads; ++tid)
            pool.emplace_back([&, tid] {
                for (int t = tid; t < cfg.ensemble_runs; t += threads)
                    runs[t] = detail::nystrom_run(w, cfg.target_rank, l, cfg.seed + t);
            });
        for (auto& th : pool) th.join();
    }

    DenseMatrix avg(w.rows(), w.cols());
    for (const auto& run : runs) add_scaled_inplace(avg, 1.0 / cfg.ensemble_runs, run);
    return avg;
}

}  // namespace srnkit

#endif
