#ifndef SRNKIT_MLP_HPP
#define SRNKIT_MLP_HPP

//
// Minimal MLP with manual backprop, SGD, and per-step SN/SRN weight hooks.
//

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "srnkit/matrix.hpp"
#include "srnkit/normalize.hpp"
#include "srnkit/power.hpp"

namespace srnkit {

enum class Activation { relu, identity };

struct Layer {
    DenseMatrix weight;         // out x in
    std::vector<double> bias;   // out
    Activation act = Activation::identity;
};

enum class NormalizerKind { none, sn, srn };

struct NormalizerSpec {
    NormalizerKind kind = NormalizerKind::none;
    double srank_ratio = 0.3;  // c: per-layer r = c * min(m, n)
};

struct MlpModel {
    std::vector<Layer> layers;
    NormalizerSpec normalizer;
    std::vector<PowerIterState> norm_states;  // one per layer, hook-owned

    std::size_t input_dim() const { return layers.front().weight.cols(); }
    std::size_t output_dim() const { return layers.back().weight.rows(); }
};

struct Dataset {
    DenseMatrix inputs;       // n x d
    std::vector<int> labels;  // in [0, num_classes)
    int num_classes = 0;
    double noise_rate = 0.0;  // informational; not used in training
};

struct StopCriterion {
    // Stop at the epoch budget, or earlier once train accuracy reaches the
    // threshold (if set).
    double train_accuracy = -1.0;
};

struct TrainConfig {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0;
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 0;
    StopCriterion stop;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

// He-style seeded initialization; layer i uses seed+i.
inline MlpModel make_mlp(const std::vector<std::size_t>& dims, Activation hidden_act,
                         NormalizerSpec normalizer, std::uint64_t seed) {
    if (dims.size() < 2) throw DimensionMismatch("need at least input and output dims");
    MlpModel model;
    model.normalizer = normalizer;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        std::mt19937_64 rng(seed + i);
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / dims[i]));
        Layer layer;
        layer.weight = DenseMatrix(dims[i + 1], dims[i]);
        for (double& x : layer.weight.data()) x = dist(rng);
        layer.bias.assign(dims[i + 1], 0.0);
        layer.act = (i + 2 == dims.size()) ? Activation::identity : hidden_act;
        model.layers.push_back(std::move(layer));
        model.norm_states.emplace_back();
    }
    return model;
}

struct ForwardCache {
    DenseMatrix logits;
    // hidden[0] is the input batch; hidden[i] the post-activation output of
    // layer i for i >= 1 (the logits are not repeated here).
    std::vector<DenseMatrix> hidden;
};

inline ForwardCache forward(const MlpModel& model, const DenseMatrix& batch) {
    if (batch.cols() != model.input_dim())
        throw DimensionMismatch("input dim does not match first layer");
    ForwardCache cache;
    cache.hidden.push_back(batch);
    DenseMatrix cur = batch;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const Layer& layer = model.layers[li];
        DenseMatrix pre = matmul_nt(cur, layer.weight);
        for (std::size_t i = 0; i < pre.rows(); ++i) {
            auto row = pre.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
        }
        if (layer.act == Activation::relu)
            for (double& x : pre.data()) x = std::max(0.0, x);
        cur = std::move(pre);
        if (li + 1 < model.layers.size()) cache.hidden.push_back(cur);
    }
    cache.logits = std::move(cur);
    return cache;
}

struct LayerGrads {
    DenseMatrix weight;
    std::vector<double> bias;
};

namespace detail {

inline void softmax_row(std::span<double> row) {
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& x : row) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : row) x /= sum;
}

}  // namespace detail

// Mean softmax cross-entropy over the batch.
inline double cross_entropy(const DenseMatrix& logits, const std::vector<int>& labels) {
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double x : row) sum += std::exp(x - mx);
        loss += std::log(sum) - (row[labels[i]] - mx);
    }
    return loss / static_cast<double>(logits.rows());
}

// Gradients of mean cross-entropy for the cached forward pass.
inline std::vector<LayerGrads> backward(const MlpModel& model, const ForwardCache& cache,
                                        const std::vector<int>& labels) {
    const std::size_t n = cache.logits.rows();
    if (labels.size() != n) throw DimensionMismatch("label count does not match batch");
    const std::size_t nlayers = model.layers.size();

    DenseMatrix delta = cache.logits;  // becomes (softmax - onehot)/n
    for (std::size_t i = 0; i < n; ++i) {
        auto row = delta.row(i);
        detail::softmax_row(row);
        row[labels[i]] -= 1.0;
        for (double& x : row) x /= static_cast<double>(n);
    }

    std::vector<LayerGrads> grads(nlayers);
    for (std::size_t li = nlayers; li-- > 0;) {
        const DenseMatrix& input = cache.hidden[li];
        grads[li].weight = matmul_tn(delta, input);
        grads[li].bias.assign(model.layers[li].weight.rows(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = delta.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) grads[li].bias[j] += row[j];
        }
        if (li == 0) break;
        DenseMatrix prev = matmul(delta, model.layers[li].weight);
        if (model.layers[li - 1].act == Activation::relu) {
            auto mask = cache.hidden[li].data();
            auto d = prev.data();
            for (std::size_t i = 0; i < d.size(); ++i)
                if (mask[i] <= 0.0) d[i] = 0.0;
        }
        delta = std::move(prev);
    }
    return grads;
}

// Applies the configured normalizer to every weight matrix in place.
inline void apply_normalizer_hooks(MlpModel& model) {
    if (model.normalizer.kind == NormalizerKind::none) return;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        DenseMatrix& w = model.layers[li].weight;
        PowerIterState& state = model.norm_states[li];
        if (state.u.size() != w.rows()) state = make_power_state(w, 7919 + li);
        if (model.normalizer.kind == NormalizerKind::sn) {
            auto [normalized, next] = spectral_normalize_approx(w, std::move(state));
            w = std::move(normalized);
            state = std::move(next);
        } else {
            const double r = std::max(
                1.0 + 1e-9,
                model.normalizer.srank_ratio * static_cast<double>(std::min(w.rows(), w.cols())));
            auto [normalized, next] = srn_layer_step(w, r, std::move(state));
            w = std::move(normalized);
            state = std::move(next);
        }
    }
}

inline double accuracy(const MlpModel& model, const Dataset& data) {
    const ForwardCache cache = forward(model, data.inputs);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < cache.logits.rows(); ++i) {
        auto row = cache.logits.row(i);
        const auto arg =
            std::distance(row.begin(), std::max_element(row.begin(), row.end()));
        if (arg == data.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(cache.logits.rows());
}

// SGD with momentum; weight decay is folded into the gradient; the
// normalizer hook runs after every parameter update.
inline TrainHistory train(MlpModel& model, const Dataset& train_set, const TrainConfig& cfg,
                          const Dataset* test_set = nullptr) {
    if (cfg.lr <= 0.0 || cfg.batch_size < 1) throw DimensionMismatch("invalid TrainConfig");
    const std::size_t n = train_set.inputs.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);

    std::vector<LayerGrads> velocity(model.layers.size());
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        velocity[li].weight =
            DenseMatrix(model.layers[li].weight.rows(), model.layers[li].weight.cols());
        velocity[li].bias.assign(model.layers[li].bias.size(), 0.0);
    }

    TrainHistory history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t bs = std::min<std::size_t>(cfg.batch_size, n - start);
            DenseMatrix batch(bs, train_set.inputs.cols());
            std::vector<int> labels(bs);
            for (std::size_t i = 0; i < bs; ++i) {
                const std::size_t src = order[start + i];
                auto dst = batch.row(i);
                auto s = train_set.inputs.row(src);
                std::copy(s.begin(), s.end(), dst.begin());
                labels[i] = train_set.labels[src];
            }
            const ForwardCache cache = forward(model, batch);
            auto grads = backward(model, cache, labels);
            for (std::size_t li = 0; li < model.layers.size(); ++li) {
                Layer& layer = model.layers[li];
                if (cfg.weight_decay != 0.0)
                    add_scaled_inplace(grads[li].weight, cfg.weight_decay, layer.weight);
                auto vw = velocity[li].weight.data();
                auto gw = grads[li].weight.data();
                auto w = layer.weight.data();
                for (std::size_t i = 0; i < w.size(); ++i) {
                    vw[i] = cfg.momentum * vw[i] + gw[i];
                    w[i] -= cfg.lr * vw[i];
                }
                for (std::size_t i = 0; i < layer.bias.size(); ++i) {
                    velocity[li].bias[i] =
                        cfg.momentum * velocity[li].bias[i] + grads[li].bias[i];
                    layer.bias[i] -= cfg.lr * velocity[li].bias[i];
                }
            }
            apply_normalizer_hooks(model);
        }

        EpochStats stats;
        {
            const ForwardCache cache = forward(model, train_set.inputs);
            stats.train_loss = cross_entropy(cache.logits, train_set.labels);
            std::size_t hits = 0;
            for (std::size_t i = 0; i < cache.logits.rows(); ++i) {
                auto row = cache.logits.row(i);
                if (std::distance(row.begin(), std::max_element(row.begin(), row.end())) ==
                    train_set.labels[i])
                    ++hits;
            }
            stats.train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
        }
        if (test_set) {
            const ForwardCache cache = forward(model, test_set->inputs);
            stats.test_loss = cross_entropy(cache.logits, test_set->labels);
            stats.test_accuracy = accuracy(model, *test_set);
        }
        history.epochs.push_back(stats);
        if (cfg.stop.train_accuracy > 0.0 && stats.train_accuracy >= cfg.stop.train_accuracy)
            break;
    }
    return history;
}

// Each label is independently replaced by a uniform draw with probability eta.
inline Dataset make_label_noise(const Dataset& data, double eta, std::uint64_t seed) {
    if (eta < 0.0 || eta > 1.0) throw DimensionMismatch("eta must be in [0,1]");
    Dataset out = data;
    out.noise_rate = eta;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, data.num_classes - 1);
    for (int& y : out.labels)
        if (coin(rng) < eta) y = pick(rng);
    return out;
}

// Gaussian clusters with a uniform class draw.
inline Dataset make_blobs(std::size_t n, int k_classes, const DenseMatrix& centers, double sigma,
                          std::uint64_t seed) {
    if (sigma <= 0.0) throw DimensionMismatch("sigma must be positive");
    if (centers.rows() != static_cast<std::size_t>(k_classes))
        throw DimensionMismatch("need one center per class");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, k_classes - 1);
    std::normal_distribution<double> noise(0.0, sigma);
    Dataset out;
    out.inputs = DenseMatrix(n, centers.cols());
    out.labels.resize(n);
    out.num_classes = k_classes;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = pick(rng);
        out.labels[i] = y;
        auto row = out.inputs.row(i);
        auto c = centers.row(y);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = c[j] + noise(rng);
    }
    return out;
}

// Deterministic 80/20 split by seeded shuffle.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& data, std::uint64_t seed,
                                                    double train_fraction = 0.8) {
    const std::size_t n = data.inputs.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_train = static_cast<std::size_t>(train_fraction * n);

    auto take = [&](std::size_t begin, std::size_t end) {
        Dataset out;
        out.inputs = DenseMatrix(end - begin, data.inputs.cols());
        out.labels.resize(end - begin);
        out.num_classes = data.num_classes;
        out.noise_rate = data.noise_rate;
        for (std::size_t i = begin; i < end; ++i) {
            auto dst = out.inputs.row(i - begin);
            auto src = data.inputs.row(order[i]);
            std::copy(src.begin(), src.end(), dst.begin());
            out.labels[i - begin] = data.labels[order[i]];
        }
        return out;
    };
    return {take(0, n_train), take(n_train, n)};
}

}  // namespace srnkit

#endif
