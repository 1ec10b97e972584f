#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "srnkit/lrlayer.hpp"

using namespace srnkit;
using oracles::random_matrix;
using oracles::random_spsd;

namespace {

LrLayerState random_state(std::size_t m, int rank, std::uint64_t seed) {
    LrLayerState s;
    s.w_aux = scaled(random_spsd(m, m, seed), 1.0 / static_cast<double>(m));
    s.bias.assign(m, 0.0);
    const DenseMatrix b = random_matrix(1, m, seed + 1);
    for (std::size_t j = 0; j < m; ++j) s.bias[j] = 0.1 * b(0, j);
    s.target_rank = rank;
    return s;
}

double total_loss(const DenseMatrix& acts, const LrLayerState& s) {
    const LrLosses l = lr_losses(acts, s);
    return s.lambda1 * l.lc + s.lambda2 * l.ln;
}

}  // namespace

TEST_CASE("lr losses match a naive loop") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const std::size_t n = 4, m = 3;
        const DenseMatrix acts = random_matrix(n, m, seed);
        const LrLayerState s = random_state(m, 2, seed + 50);

        double lc = 0.0, ln = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double norm_a2 = 0.0;
            for (std::size_t q = 0; q < m; ++q) {
                double rq = 0.0;
                for (std::size_t p = 0; p < m; ++p)
                    rq += s.w_aux(p, q) * (acts(i, p) + s.bias[p]);
                rq -= acts(i, q) + s.bias[q];
                lc += rq * rq;
                norm_a2 += acts(i, q) * acts(i, q);
            }
            ln += std::abs(1.0 - std::sqrt(norm_a2));
        }
        lc /= n;
        ln /= n;

        const LrLosses out = lr_losses(acts, s);
        CHECK(out.lc == doctest::Approx(lc).epsilon(1e-12));
        CHECK(out.ln == doctest::Approx(ln).epsilon(1e-12));
    }
}

TEST_CASE("lr losses zero cases") {
    // W = I makes the reconstruction residual vanish; unit-norm rows zero L_n
    LrLayerState s;
    s.w_aux = DenseMatrix::identity(2);
    s.bias = {0.3, -0.2};
    const DenseMatrix acts{{1.0, 0.0}, {0.0, -1.0}};
    const LrLosses l = lr_losses(acts, s);
    CHECK(l.lc == 0.0);
    CHECK(l.ln == 0.0);
}

TEST_CASE("lr grads agree with central finite differences") {
    const double h = 1e-6;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const std::size_t n = 3, m = 4;
        DenseMatrix acts = random_matrix(n, m, 900 + seed);
        LrLayerState s = random_state(m, 2, 300 + seed);
        s.lambda1 = 1.0 + 0.25 * (seed % 3);
        s.lambda2 = 0.5 + 0.25 * (seed % 2);
        const LrGrads g = lr_grads(acts, s);

        auto close = [](double got, double want) {
            return std::abs(got - want) <= 1e-4 * std::max(1.0, std::abs(want));
        };

        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double keep = acts(i, j);
                acts(i, j) = keep + h;
                const double up = total_loss(acts, s);
                acts(i, j) = keep - h;
                const double dn = total_loss(acts, s);
                acts(i, j) = keep;
                CHECK(close(g.grad_activations(i, j), (up - dn) / (2 * h)));
            }
        for (std::size_t p = 0; p < m; ++p)
            for (std::size_t q = 0; q < m; ++q) {
                const double keep = s.w_aux(p, q);
                s.w_aux(p, q) = keep + h;
                const double up = total_loss(acts, s);
                s.w_aux(p, q) = keep - h;
                const double dn = total_loss(acts, s);
                s.w_aux(p, q) = keep;
                CHECK(close(g.grad_w(p, q), (up - dn) / (2 * h)));
            }
        for (std::size_t j = 0; j < m; ++j) {
            const double keep = s.bias[j];
            s.bias[j] = keep + h;
            const double up = total_loss(acts, s);
            s.bias[j] = keep - h;
            const double dn = total_loss(acts, s);
            s.bias[j] = keep;
            CHECK(close(g.grad_b[j], (up - dn) / (2 * h)));
        }
    }
}

TEST_CASE("norm-floor subgradient is zero at the hinge points") {
    LrLayerState s = random_state(2, 1, 4);
    s.lambda1 = 0.0;  // isolate L_n
    const DenseMatrix acts{{1.0, 0.0}, {0.0, 0.0}};
    const LrGrads g = lr_grads(acts, s);
    CHECK(frobenius_norm(g.grad_activations) == 0.0);
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
    const std::size_t m = 3;
    const LrLayerState s = random_state(m, 2, 7);
    const DenseMatrix batch = random_matrix(4, m, 8);
    const LrGrads full = lr_grads(batch, s);

    DenseMatrix mean_w(m, m);
    std::vector<double> mean_b(m, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
        DenseMatrix one(1, m);
        for (std::size_t j = 0; j < m; ++j) one(0, j) = batch(i, j);
        const LrGrads gi = lr_grads(one, s);
        add_scaled_inplace(mean_w, 0.25, gi.grad_w);
        for (std::size_t j = 0; j < m; ++j) mean_b[j] += 0.25 * gi.grad_b[j];
        for (std::size_t j = 0; j < m; ++j)
            CHECK(full.grad_activations(i, j) ==
                  doctest::Approx(0.25 * gi.grad_activations(0, j)).epsilon(1e-12));
    }
    CHECK(frobenius_distance(full.grad_w, mean_w) <= 1e-12 * (1.0 + frobenius_norm(mean_w)));
    for (std::size_t j = 0; j < m; ++j)
        CHECK(full.grad_b[j] == doctest::Approx(mean_b[j]).epsilon(1e-10));
}

TEST_CASE("projection step keeps rank at or below the target") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::size_t m = 8;
        LrLayerState s = random_state(m, 3, 60 + seed);
        const DenseMatrix grad = symmetrize(random_matrix(m, m, 160 + seed));

        for (bool use_nystrom : {false, true}) {
            // the rank bound is per run; an ensemble average can have rank t*r
            NystromConfig ncfg;
            ncfg.sample_count = 6;
            ncfg.ensemble_runs = 1;
            ncfg.seed = seed;
            const LrLayerState next = lr_project_step(s, grad, 0.05, use_nystrom, ncfg);
            const auto sig = svd(next.w_aux).sigma;
            CHECK(sig[3] <= 1e-8 * std::max(sig[0], 1e-300));
            CHECK(frobenius_distance(next.w_aux, transpose(next.w_aux)) <= 1e-10);
        }
    }
}

TEST_CASE("rank invariant survives repeated projected steps") {
    const std::size_t m = 6;
    LrLayerState s = random_state(m, 2, 5);
    const DenseMatrix acts = random_matrix(10, m, 6);
    NystromConfig ncfg;
    for (int step = 0; step < 200; ++step) {
        const LrGrads g = lr_grads(acts, s);
        s = lr_project_step(s, g.grad_w, 0.01, false, ncfg);
    }
    const auto sig = svd(s.w_aux).sigma;
    CHECK(sig[2] <= 1e-8 * std::max(sig[0], 1e-300));
}

TEST_CASE("exact projection equals the truncated-SVD oracle") {
    const std::size_t m = 7;
    const LrLayerState s = random_state(m, 3, 12);
    const DenseMatrix grad = symmetrize(random_matrix(m, m, 13));
    NystromConfig ncfg;
    const LrLayerState next = lr_project_step(s, grad, 0.1, false, ncfg);

    // oracle: rebuild the projection from SVD factors directly
    const DenseMatrix updated =
        smooth_spd(symmetrize(add_scaled(s.w_aux, -0.1, grad)), ncfg.smoothing_delta,
                   ncfg.smoothing_max_rounds);
    SvdFactors f = svd(updated);
    for (std::size_t i = 3; i < f.sigma.size(); ++i) f.sigma[i] = 0.0;
    CHECK(frobenius_distance(next.w_aux, f.reconstruct()) <= 1e-10);
}

TEST_CASE("nystrom projection with full sampling matches the exact path") {
    const std::size_t m = 6;
    LrLayerState s = random_state(m, 2, 21);
    // keep the updated matrix comfortably PSD so both projections agree
    for (std::size_t i = 0; i < m; ++i) s.w_aux(i, i) += 2.0;
    const DenseMatrix grad = symmetrize(random_matrix(m, m, 22));
    NystromConfig ncfg;
    ncfg.sample_count = static_cast<int>(m);
    const LrLayerState exact = lr_project_step(s, grad, 0.01, false, ncfg);
    const LrLayerState approx = lr_project_step(s, grad, 0.01, true, ncfg);
    CHECK(frobenius_distance(exact.w_aux, approx.w_aux) <=
          1e-6 * (1.0 + frobenius_norm(exact.w_aux)));
}

TEST_CASE("shape mismatches are rejected") {
    const LrLayerState s = random_state(3, 1, 1);
    CHECK_THROWS_AS(lr_losses(random_matrix(2, 4, 1), s), DimensionMismatch);
    CHECK_THROWS_AS(lr_grads(random_matrix(2, 4, 1), s), DimensionMismatch);
    CHECK_THROWS_AS(lr_project_step(s, random_matrix(2, 2, 1), 0.1, false, NystromConfig{}),
                    DimensionMismatch);
}
