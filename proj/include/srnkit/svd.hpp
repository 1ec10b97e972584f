#ifndef SRNKIT_SVD_HPP
#define SRNKIT_SVD_HPP

//
// Economy-size SVD via one-sided (Hestenes) Jacobi rotations on the tall side.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "srnkit/matrix.hpp"

namespace srnkit {

struct SvdFactors {
    std::vector<double> sigma;  // non-negative, non-increasing
    DenseMatrix u;              // m x p, orthonormal columns
    DenseMatrix v;              // n x p, orthonormal columns

    DenseMatrix reconstruct() const {
        DenseMatrix w(u.rows(), v.rows());
        for (std::size_t k = 0; k < sigma.size(); ++k)
            for (std::size_t i = 0; i < u.rows(); ++i)
                for (std::size_t j = 0; j < v.rows(); ++j)
                    w(i, j) += sigma[k] * u(i, k) * v(j, k);
        return w;
    }
};

namespace detail {

// One-sided Jacobi on A (m x n, m >= n). Rotations are applied to column
// pairs of A and accumulated into V. Convergence when the remaining
// off-diagonal mass of the implicit Gram matrix is negligible against
// ||W||_F^2; 100 sweep cap.
inline bool jacobi_tall(DenseMatrix& a, DenseMatrix& v) {
    const std::size_t n = a.cols();
    const std::size_t m = a.rows();
    double fro2 = 0.0;
    for (double x : a.data()) fro2 += x * x;
    if (fro2 == 0.0) return true;
    const double threshold = 1e-12 * fro2;

    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off2 = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = a(i, p), y = a(i, q);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                off2 += apq * apq;
                if (std::abs(apq) <= 1e-18 * std::sqrt(app * aqq) || apq == 0.0) continue;

                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = a(i, p), y = a(i, q);
                    a(i, p) = c * x - s * y;
                    a(i, q) = s * x + c * y;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = v(i, p), y = v(i, q);
                    v(i, p) = c * x - s * y;
                    v(i, q) = s * x + c * y;
                }
            }
        }
        if (std::sqrt(off2) <= threshold) return true;
    }
    return false;
}

// Orthonormal completion for null columns: greedy Gram-Schmidt of coordinate
// vectors against the columns already present.
inline void complete_column(DenseMatrix& u, std::size_t col) {
    const std::size_t m = u.rows();
    for (std::size_t trial = 0; trial < m; ++trial) {
        std::vector<double> cand(m, 0.0);
        cand[trial] = 1.0;
        for (std::size_t k = 0; k < u.cols(); ++k) {
            if (k == col) continue;
            double d = 0.0;
            for (std::size_t i = 0; i < m; ++i) d += cand[i] * u(i, k);
            for (std::size_t i = 0; i < m; ++i) cand[i] -= d * u(i, k);
        }
        const double nrm = norm2(cand);
        if (nrm > 1e-6) {
            for (std::size_t i = 0; i < m; ++i) u(i, col) = cand[i] / nrm;
            return;
        }
    }
}

}  // namespace detail

inline std::optional<SvdFactors> try_svd(const DenseMatrix& w) {
    const bool flipped = w.rows() < w.cols();
    DenseMatrix a = flipped ? transpose(w) : w;
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();

    DenseMatrix v = DenseMatrix::identity(n);
    if (!detail::jacobi_tall(a, v)) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> colnorm(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += a(i, j) * a(i, j);
        colnorm[j] = std::sqrt(s);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return colnorm[x] > colnorm[y]; });

    SvdFactors f;
    f.sigma.resize(n);
    f.u = DenseMatrix(m, n);
    f.v = DenseMatrix(n, n);
    const double scale = *std::max_element(colnorm.begin(), colnorm.end());
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        f.sigma[k] = colnorm[j];
        for (std::size_t i = 0; i < n; ++i) f.v(i, k) = v(i, j);
        if (colnorm[j] > 1e-300 && colnorm[j] > 1e-15 * scale) {
            for (std::size_t i = 0; i < m; ++i) f.u(i, k) = a(i, j) / colnorm[j];
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        if (!(colnorm[j] > 1e-300 && colnorm[j] > 1e-15 * scale))
            detail::complete_column(f.u, k);
    }

    if (flipped) std::swap(f.u, f.v);
    return f;
}

inline SvdFactors svd(const DenseMatrix& w) {
    auto f = try_svd(w);
    if (!f) throw ConvergenceFailure("jacobi SVD did not converge within the sweep cap");
    return *f;
}

inline double spectral_norm(const DenseMatrix& w) {
    const auto f = svd(w);
    return f.sigma.empty() ? 0.0 : f.sigma[0];
}

}  // namespace srnkit

#endif
