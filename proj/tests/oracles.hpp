#ifndef SRNKIT_TESTS_ORACLES_HPP
#define SRNKIT_TESTS_ORACLES_HPP

//
// Test-only oracles, independent of the implementation paths they check.
//

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "srnkit/matrix.hpp"
#include "srnkit/svd.hpp"

namespace srnkit::oracles {

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    DenseMatrix m(rows, cols);
    for (double& x : m.data()) x = gauss(rng);
    return m;
}

inline DenseMatrix random_spsd(std::size_t n, int rank, std::uint64_t seed) {
    const DenseMatrix b = random_matrix(n, rank, seed);
    return matmul_nt(b, b);
}

// Best Frobenius distance achievable by gamma1*S1 + gamma2*S2 (k=0 split)
// under the stable-rank equality, found by brute search: a 2000^2 grid over
// (gamma1, gamma2) with an equality band, then local refinement where gamma2
// is solved exactly from the constraint.
inline double srn_scaling_oracle_distance(const DenseMatrix& w, double r,
                                          int grid = 2000) {
    const auto f = svd(w);
    const double s1 = f.sigma[0];
    const double s2 = f.sigma.size() > 1 ? f.sigma[1] : 0.0;
    double tail2 = 0.0;
    for (std::size_t i = 1; i < f.sigma.size(); ++i) tail2 += f.sigma[i] * f.sigma[i];
    const double a = s1 * s1;

    auto dist2 = [&](double g1, double g2) {
        return (1.0 - g1) * (1.0 - g1) * a + (1.0 - g2) * (1.0 - g2) * tail2;
    };
    auto srank_of = [&](double g1, double g2) {
        const double top = std::max(g1 * s1, g2 * s2);
        return (g1 * g1 * a + g2 * g2 * tail2) / (top * top);
    };

    // Grid sweep: locate the banded-equality winner. Banded candidates may be
    // slightly infeasible, so this only seeds the exact refinement below and
    // never contributes to the returned distance.
    const double g1_lo = 0.0, g1_hi = 2.0, g2_lo = 0.0, g2_hi = 2.0;
    const double step = (g1_hi - g1_lo) / grid;
    const double band = 8.0 * step * std::max(1.0, r);
    double grid_best = std::numeric_limits<double>::infinity();
    double best_g1 = 1.0;
    for (int i = 0; i <= grid; ++i) {
        const double g1 = g1_lo + i * step;
        for (int j = 0; j <= grid; ++j) {
            const double g2 = g2_lo + j * (g2_hi - g2_lo) / grid;
            if (g1 * s1 <= 0.0 && g2 * s2 <= 0.0) continue;
            if (std::abs(srank_of(g1, g2) - r) > band) continue;
            const double d = dist2(g1, g2);
            if (d < grid_best) {
                grid_best = d;
                best_g1 = g1;
            }
        }
    }

    // refine: exact gamma2 from the equality for gamma1 near the grid winner
    auto exact_best_for_g1 = [&](double g1) {
        double out = std::numeric_limits<double>::infinity();
        if (g1 <= 0.0 || tail2 <= 0.0) return out;
        // branch 1: top singular value is gamma1*sigma1
        {
            const double g2 = g1 * s1 * std::sqrt(std::max(0.0, r - 1.0)) / std::sqrt(tail2);
            if (g2 * s2 <= g1 * s1 + 1e-12) out = std::min(out, dist2(g1, g2));
        }
        // branch 2: top singular value is gamma2*sigma2
        if (s2 > 0.0) {
            const double denom = r * s2 * s2 - tail2;
            if (denom > 0.0) {
                const double g2 = g1 * s1 / std::sqrt(denom);
                if (g2 * s2 >= g1 * s1 - 1e-12) out = std::min(out, dist2(g1, g2));
            }
        }
        return out;
    };

    // Exact refinement: one full-range pass (so the seed cannot mislead),
    // then shrinking windows around the best feasible point found so far.
    double best = std::numeric_limits<double>::infinity();
    double center = best_g1;
    {
        for (int i = 0; i <= 2000; ++i) {
            const double g1 = g1_lo + (g1_hi - g1_lo) * i / 2000.0;
            const double d = exact_best_for_g1(g1);
            if (d < best) {
                best = d;
                center = g1;
            }
        }
    }
    double span = std::max(2.0 * step, (g1_hi - g1_lo) / 2000.0);
    for (int round = 0; round < 8; ++round) {
        double round_best = best;
        double round_g1 = center;
        for (int i = 0; i <= 400; ++i) {
            const double g1 = center - span + 2.0 * span * i / 400.0;
            const double d = exact_best_for_g1(g1);
            if (d < round_best) {
                round_best = d;
                round_g1 = g1;
            }
        }
        best = round_best;
        center = round_g1;
        span /= 25.0;
    }
    return std::sqrt(best);
}

}  // namespace srnkit::oracles

#endif
