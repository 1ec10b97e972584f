#ifndef SRNKIT_MEASURES_HPP
#define SRNKIT_MEASURES_HPP

//
// Generalization and sensitivity diagnostics over a trained model: margins,
// margin-normalized complexity measures, noise sensitivity, layer cushions,
// and empirical Lipschitz statistics.
//

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "srnkit/mlp.hpp"
#include "srnkit/normalize.hpp"
#include "srnkit/svd.hpp"

namespace srnkit {

struct MeasureReport {
    std::vector<double> per_sample_margins;
    double spec_fro_p90 = 0.0;  // 90th percentile of log values
    double spec_l1_p90 = 0.0;
    std::vector<double> jac_norm;  // per sample, zero-margin samples skipped
    double noise_sensitivity = 0.0;
    double noise_sensitivity_std_error = 0.0;
    std::vector<double> layer_cushions;
    double lipschitz_upper = 0.0;
    std::vector<double> elhist;
    double elhist_p95 = 0.0;
    int zero_margin_count = 0;
};

inline double margin(std::span<const double> logits, int label) {
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logits.size(); ++j)
        if (static_cast<int>(j) != label) best_other = std::max(best_other, logits[j]);
    return logits[label] - best_other;
}

inline std::vector<double> per_sample_margins(const MlpModel& model, const Dataset& data) {
    const ForwardCache cache = forward(model, data.inputs);
    std::vector<double> out(cache.logits.rows());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = margin(cache.logits.row(i), data.labels[i]);
    return out;
}

// Nearest-rank percentile on a sorted copy.
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw EmptyAfterSkip("percentile of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(p / 100.0 * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

inline double lipschitz_upper(const MlpModel& model) {
    double prod = 1.0;
    for (const Layer& layer : model.layers) prod *= spectral_norm(layer.weight);
    return prod;
}

namespace detail {

struct LayerNorms {
    std::vector<double> spectral;    // sigma_1 per layer
    std::vector<double> srank;       // stable rank per layer
    std::vector<double> norm21_t;    // ||W_i^T||_{2,1}: sum of row l2 norms of W_i
};

inline LayerNorms layer_norms(const MlpModel& model) {
    LayerNorms n;
    for (const Layer& layer : model.layers) {
        const auto f = svd(layer.weight);
        double fro2 = 0.0;
        for (double s : f.sigma) fro2 += s * s;
        n.spectral.push_back(f.sigma[0]);
        n.srank.push_back(fro2 / (f.sigma[0] * f.sigma[0]));
        double n21 = 0.0;
        for (std::size_t i = 0; i < layer.weight.rows(); ++i)
            n21 += norm2(layer.weight.row(i));
        n.norm21_t.push_back(n21);
    }
    return n;
}

}  // namespace detail

// prod_i ||W_i||_2^2 * sum_i srank(W_i) / gamma^2, per sample. Samples with
// gamma <= 0 are skipped and counted in *excluded.
inline std::vector<double> spec_fro(const MlpModel& model, const std::vector<double>& margins,
                                    int* excluded = nullptr) {
    const auto n = detail::layer_norms(model);
    double prod = 1.0, srank_sum = 0.0;
    for (std::size_t i = 0; i < n.spectral.size(); ++i) {
        prod *= n.spectral[i] * n.spectral[i];
        srank_sum += n.srank[i];
    }
    std::vector<double> out;
    int skipped = 0;
    for (double g : margins) {
        if (g <= 0.0) {
            ++skipped;
            continue;
        }
        out.push_back(prod * srank_sum / (g * g));
    }
    if (excluded) *excluded = skipped;
    return out;
}

// prod_i ||W_i||_2^2 * (sum_i ||W_i^T||_{2,1}^{2/3} / ||W_i||_2^{2/3})^3 / gamma^2
inline std::vector<double> spec_l1(const MlpModel& model, const std::vector<double>& margins,
                                   int* excluded = nullptr) {
    const auto n = detail::layer_norms(model);
    double prod = 1.0, ratio_sum = 0.0;
    for (std::size_t i = 0; i < n.spectral.size(); ++i) {
        prod *= n.spectral[i] * n.spectral[i];
        ratio_sum += std::pow(n.norm21_t[i] / n.spectral[i], 2.0 / 3.0);
    }
    const double agg = prod * std::pow(ratio_sum, 3.0);
    std::vector<double> out;
    int skipped = 0;
    for (double g : margins) {
        if (g <= 0.0) {
            ++skipped;
            continue;
        }
        out.push_back(agg / (g * g));
    }
    if (excluded) *excluded = skipped;
    return out;
}

// Margin-free spectral complexity with the 3/2 exponent (reference matrices
// fixed at zero).
inline double r_g(const MlpModel& model) {
    const auto n = detail::layer_norms(model);
    double prod = 1.0, ratio_sum = 0.0;
    for (std::size_t i = 0; i < n.spectral.size(); ++i) {
        prod *= n.spectral[i];
        ratio_sum += std::pow(n.norm21_t[i] / n.spectral[i], 2.0 / 3.0);
    }
    return prod * std::pow(ratio_sum, 1.5);
}

// sum_i ||h_i|| * ||d gamma / d h_i|| / gamma, with h_0 the input sample.
inline double jac_norm(const MlpModel& model, std::span<const double> sample, int label) {
    DenseMatrix x(1, sample.size());
    std::copy(sample.begin(), sample.end(), x.row(0).begin());
    const ForwardCache cache = forward(model, x);
    auto logits = cache.logits.row(0);
    const double g = margin(logits, label);
    if (g == 0.0) throw ZeroMarginError();

    // gradient of the margin at the logits: e_label - e_runnerup
    std::size_t runner = label == 0 ? 1 : 0;
    for (std::size_t j = 0; j < logits.size(); ++j)
        if (static_cast<int>(j) != label && logits[j] > logits[runner]) runner = j;
    std::vector<double> delta(logits.size(), 0.0);
    delta[label] = 1.0;
    delta[runner] -= 1.0;

    double sum = 0.0;
    for (std::size_t li = model.layers.size(); li-- > 0;) {
        delta = matvec_t(model.layers[li].weight, delta);  // gradient wrt layer input
        sum += norm2(cache.hidden[li].row(0)) * norm2(delta);
        // chain through the activation of the layer below before descending
        if (li > 0 && model.layers[li - 1].act == Activation::relu) {
            auto h = cache.hidden[li].row(0);
            for (std::size_t j = 0; j < delta.size(); ++j)
                if (h[j] <= 0.0) delta[j] = 0.0;
        }
    }
    return sum / g;
}

struct NoiseSensitivity {
    double value = 0.0;      // max over the dataset of the per-point estimate
    double std_error = 0.0;  // Monte Carlo standard error at the argmax point
};

// Phi = max_x E_eta ||f(x + eta ||x||) - f(x)||^2 / ||f(x)||^2, eta ~ N(0,I).
inline NoiseSensitivity noise_sensitivity(const MlpModel& model, const Dataset& data,
                                          int n_draws = 1000, std::uint64_t seed = 0) {
    if (n_draws < 2) throw DimensionMismatch("need at least two draws");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t d = data.inputs.cols();
    NoiseSensitivity best;
    for (std::size_t i = 0; i < data.inputs.rows(); ++i) {
        DenseMatrix x(1, d);
        std::copy(data.inputs.row(i).begin(), data.inputs.row(i).end(), x.row(0).begin());
        const auto fx = forward(model, x).logits;
        const double fx_norm2 = dot(fx.row(0), fx.row(0));
        if (fx_norm2 == 0.0) throw ZeroOutputError();
        const double x_norm = norm2(x.row(0));

        double mean = 0.0, m2 = 0.0;
        DenseMatrix xp(1, d);
        for (int t = 0; t < n_draws; ++t) {
            for (std::size_t j = 0; j < d; ++j)
                xp(0, j) = x(0, j) + gauss(rng) * x_norm;
            const auto fp = forward(model, xp).logits;
            double diff2 = 0.0;
            for (std::size_t j = 0; j < fp.cols(); ++j) {
                const double e = fp(0, j) - fx(0, j);
                diff2 += e * e;
            }
            const double ratio = diff2 / fx_norm2;
            const double d1 = ratio - mean;
            mean += d1 / (t + 1);
            m2 += d1 * (ratio - mean);
        }
        if (mean > best.value) {
            best.value = mean;
            best.std_error = std::sqrt(m2 / (n_draws - 1.0) / n_draws);
        }
    }
    return best;
}

// min over the dataset of ||W_i a|| / (||W_i||_F ||a||), a the input to
// layer i. Zero inputs are skipped; the skip count is reported.
inline double layer_cushion(const MlpModel& model, const Dataset& data, std::size_t layer_index,
                            int* skipped = nullptr) {
    if (layer_index >= model.layers.size()) throw DimensionMismatch("layer index out of range");
    const ForwardCache cache = forward(model, data.inputs);
    const DenseMatrix& acts = cache.hidden[layer_index];
    const DenseMatrix& w = model.layers[layer_index].weight;
    const double wf = frobenius_norm(w);
    double best = std::numeric_limits<double>::infinity();
    int skips = 0;
    for (std::size_t i = 0; i < acts.rows(); ++i) {
        const double an = norm2(acts.row(i));
        if (an == 0.0) {
            ++skips;
            continue;
        }
        best = std::min(best, norm2(matvec(w, acts.row(i))) / (wf * an));
    }
    if (skipped) *skipped = skips;
    if (!std::isfinite(best)) throw EmptyAfterSkip("all activations were zero");
    return best;
}

// Pairwise output/input distance ratios over sampled cross pairs.
inline std::vector<double> elhist(const MlpModel& model, const Dataset& data_a,
                                  const Dataset& data_b, int n_pairs, std::uint64_t seed) {
    if (n_pairs < 1) throw DimensionMismatch("n_pairs must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pa(0, data_a.inputs.rows() - 1);
    std::uniform_int_distribution<std::size_t> pb(0, data_b.inputs.rows() - 1);
    const auto fa = forward(model, data_a.inputs).logits;
    const auto fb = forward(model, data_b.inputs).logits;

    std::vector<double> ratios;
    ratios.reserve(n_pairs);
    long budget = 100L * n_pairs;
    while (static_cast<int>(ratios.size()) < n_pairs) {
        if (budget-- <= 0) throw DegenerateData("could not sample distinct pairs");
        const std::size_t i = pa(rng), j = pb(rng);
        double dx2 = 0.0;
        auto xi = data_a.inputs.row(i);
        auto xj = data_b.inputs.row(j);
        for (std::size_t k = 0; k < xi.size(); ++k) {
            const double e = xi[k] - xj[k];
            dx2 += e * e;
        }
        if (dx2 == 0.0) continue;
        double df2 = 0.0;
        for (std::size_t k = 0; k < fa.cols(); ++k) {
            const double e = fa(i, k) - fb(j, k);
            df2 += e * e;
        }
        ratios.push_back(std::sqrt(df2 / dx2));
    }
    return ratios;
}

inline MeasureReport compute_measures(const MlpModel& model, const Dataset& data,
                                      int noise_draws = 1000, int elhist_pairs = 2000,
                                      std::uint64_t seed = 0) {
    MeasureReport report;
    report.per_sample_margins = per_sample_margins(model, data);
    int skipped_fro = 0;
    auto fro = spec_fro(model, report.per_sample_margins, &skipped_fro);
    auto l1 = spec_l1(model, report.per_sample_margins);
    report.zero_margin_count = skipped_fro;
    if (!fro.empty()) {
        for (double& x : fro) x = std::log(x);
        for (double& x : l1) x = std::log(x);
        report.spec_fro_p90 = percentile(fro, 90.0);
        report.spec_l1_p90 = percentile(l1, 90.0);
    }
    for (std::size_t i = 0; i < data.inputs.rows(); ++i) {
        if (report.per_sample_margins[i] == 0.0) continue;
        report.jac_norm.push_back(jac_norm(model, data.inputs.row(i), data.labels[i]));
    }
    const auto phi = noise_sensitivity(model, data, noise_draws, seed);
    report.noise_sensitivity = phi.value;
    report.noise_sensitivity_std_error = phi.std_error;
    for (std::size_t li = 0; li < model.layers.size(); ++li)
        report.layer_cushions.push_back(layer_cushion(model, data, li));
    report.lipschitz_upper = lipschitz_upper(model);
    report.elhist = elhist(model, data, data, elhist_pairs, seed + 1);
    report.elhist_p95 = percentile(report.elhist, 95.0);
    return report;
}

}  // namespace srnkit

#endif
