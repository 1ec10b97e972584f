#ifndef SRNKIT_CLI_HPP
#define SRNKIT_CLI_HPP

//
// CLI front-end: wires files to library operations and experiment drivers.
// Exit codes: 0 ok, 2 parse/usage error, 3 infeasible target, 4 shape error.
//

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "srnkit/io.hpp"
#include "srnkit/lrlayer.hpp"
#include "srnkit/measures.hpp"
#include "srnkit/mlp.hpp"
#include "srnkit/normalize.hpp"
#include "srnkit/nystrom.hpp"

namespace srnkit::cli {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitShape = 4;

struct NormalizeArgs {
    std::string input, output;
    double target_srank = 0.0;
    double srank_ratio = 0.0;
    double spectral_cap = 0.0;
    int k = 0;
    std::uint64_t seed = 0;
};

inline int cmd_normalize(const NormalizeArgs& args) {
    const DenseMatrix w = read_mat1(args.input);
    const auto before = svd(w);
    double fro2 = 0.0;
    for (double s : before.sigma) fro2 += s * s;
    const double sigma1_before = before.sigma[0];
    if (sigma1_before == 0.0) throw ZeroMatrixError();
    const double srank_before = fro2 / (sigma1_before * sigma1_before);

    DenseMatrix result = w;
    double gamma1 = 1.0, gamma2 = 1.0;
    bool was_noop = true;
    if (args.target_srank > 0.0 || args.srank_ratio > 0.0) {
        SrnConfig cfg;
        cfg.target_stable_rank = args.target_srank;
        cfg.stable_rank_ratio = args.srank_ratio;
        cfg.partition_index = args.k;
        cfg.seed = args.seed;
        const SrnResult res = srn_closed_form(w, cfg);
        result = res.matrix;
        gamma1 = res.gamma1;
        gamma2 = res.gamma2;
        was_noop = res.was_noop;
    }
    if (args.spectral_cap > 0.0) result = spectral_normalize_optimal(result, args.spectral_cap);

    const auto after = svd(result);
    double fro2_after = 0.0;
    for (double s : after.sigma) fro2_after += s * s;

    nlohmann::json sidecar;
    sidecar["schema"] = "srnkit/1";
    sidecar["stable_rank_before"] = format_real(srank_before);
    sidecar["stable_rank_after"] =
        format_real(fro2_after / (after.sigma[0] * after.sigma[0]));
    sidecar["sigma1_before"] = format_real(sigma1_before);
    sidecar["sigma1_after"] = format_real(after.sigma[0]);
    sidecar["gamma1"] = format_real(gamma1);
    sidecar["gamma2"] = format_real(gamma2);
    sidecar["frobenius_distance"] = format_real(frobenius_distance(w, result));
    sidecar["was_noop"] = was_noop;

    write_mat1(args.output, result);
    write_file_atomic(args.output + ".json", sidecar.dump(2) + "\n");
    return kExitOk;
}

struct MeasureArgs {
    std::string model, data, output;
    int noise_draws = 1000;
    int elhist_pairs = 2000;
    std::uint64_t seed = 0;
};

inline int cmd_measure(const MeasureArgs& args) {
    const MlpModel model = read_checkpoint(args.model);
    const Dataset data = read_ds1(args.data);
    if (data.inputs.cols() != model.input_dim())
        throw DimensionMismatch("dataset dimension does not match model input");
    const MeasureReport report =
        compute_measures(model, data, args.noise_draws, args.elhist_pairs, args.seed);
    write_file_atomic(args.output, report_to_json(report).dump(2) + "\n");
    return kExitOk;
}

struct TrainArgs {
    std::string data;    // DS1 path; empty means synthetic blobs
    std::string output;  // checkpoint path
    std::string history; // optional CSV path
    std::size_t n = 2000;
    std::size_t dim = 20;
    int classes = 10;
    double blob_sigma = 1.0;
    double center_scale = 10.0;
    std::size_t width = 256;
    int depth = 2;
    std::string normalizer = "none";
    double srank_ratio = 0.3;
    int epochs = 100;
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0;
    int batch_size = 128;
    double stop_accuracy = -1.0;
    std::uint64_t seed = 0;
};

inline NormalizerSpec parse_normalizer(const std::string& name, double ratio) {
    NormalizerSpec spec;
    spec.srank_ratio = ratio;
    if (name == "none")
        spec.kind = NormalizerKind::none;
    else if (name == "sn")
        spec.kind = NormalizerKind::sn;
    else if (name == "srn")
        spec.kind = NormalizerKind::srn;
    else
        throw ParseError("unknown normalizer: " + name);
    return spec;
}

inline DenseMatrix default_blob_centers(int k_classes, std::size_t dim, double scale,
                                        std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0xb10b5ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    DenseMatrix centers(k_classes, dim);
    for (std::size_t i = 0; i < centers.rows(); ++i) {
        auto row = centers.row(i);
        for (double& x : row) x = gauss(rng);
        const double nrm = norm2(row);
        for (double& x : row) x *= scale / nrm;
    }
    return centers;
}

inline std::string history_to_csv(const TrainHistory& history) {
    std::ostringstream out;
    out << "epoch,train_loss,train_accuracy,test_loss,test_accuracy\n";
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const auto& s = history.epochs[e];
        out << e << ',' << format_real(s.train_loss) << ',' << format_real(s.train_accuracy)
            << ',' << format_real(s.test_loss) << ',' << format_real(s.test_accuracy) << '\n';
    }
    return out.str();
}

inline int cmd_train(const TrainArgs& args) {
    Dataset full;
    if (!args.data.empty()) {
        full = read_ds1(args.data);
    } else {
        const DenseMatrix centers =
            default_blob_centers(args.classes, args.dim, args.center_scale, args.seed);
        full = make_blobs(args.n, args.classes, centers, args.blob_sigma, args.seed);
    }
    auto [train_set, test_set] = split_train_test(full, args.seed);

    std::vector<std::size_t> dims;
    dims.push_back(train_set.inputs.cols());
    for (int i = 0; i + 1 < args.depth; ++i) dims.push_back(args.width);
    dims.push_back(train_set.num_classes);
    MlpModel model = make_mlp(dims, Activation::relu,
                              parse_normalizer(args.normalizer, args.srank_ratio), args.seed);

    TrainConfig cfg;
    cfg.lr = args.lr;
    cfg.momentum = args.momentum;
    cfg.weight_decay = args.weight_decay;
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch_size;
    cfg.seed = args.seed;
    cfg.stop.train_accuracy = args.stop_accuracy;
    const TrainHistory history = train(model, train_set, cfg, &test_set);

    write_checkpoint(args.output, model);
    if (!args.history.empty()) write_file_atomic(args.history, history_to_csv(history));
    return kExitOk;
}

struct ShatteringArgs {
    std::string output;  // CSV
    std::size_t n = 2000;
    std::size_t dim = 20;
    int classes = 10;
    std::size_t width = 256;
    int epochs = 500;
    int seeds = 5;
    double lr = 0.1;
    double momentum = 0.9;
    double srank_ratio = 0.3;
    int batch_size = 128;
    double blob_sigma = 1.0;
    double center_scale = 10.0;
    double stop_accuracy = 0.995;
    bool clean = false;  // keep true labels instead of full relabeling
    std::uint64_t seed = 0;
};

struct ShatteringOutcome {
    std::string csv;
    double mean_train_vanilla = 0.0;
    double mean_train_srn = 0.0;
    double mean_test_vanilla = 0.0;
    double mean_test_srn = 0.0;
};

// Vanilla vs SN vs SRN on (optionally random-labeled) blobs across seeds.
inline ShatteringOutcome run_shattering(const ShatteringArgs& args) {
    std::ostringstream csv;
    csv << "seed,normalizer,final_train_accuracy,test_accuracy\n";
    const char* kinds[] = {"none", "sn", "srn"};
    double sum_train[3] = {0, 0, 0};
    double sum_test[3] = {0, 0, 0};

    for (int s = 0; s < args.seeds; ++s) {
        const std::uint64_t seed = args.seed + s;
        const DenseMatrix centers =
            default_blob_centers(args.classes, args.dim, args.center_scale, seed);
        Dataset full = make_blobs(args.n, args.classes, centers, args.blob_sigma, seed);
        auto [train_set, test_set] = split_train_test(full, seed);
        if (!args.clean) train_set = make_label_noise(train_set, 1.0, seed + 17);

        for (int kind = 0; kind < 3; ++kind) {
            MlpModel model = make_mlp({train_set.inputs.cols(), args.width,
                                       static_cast<std::size_t>(train_set.num_classes)},
                                      Activation::relu,
                                      parse_normalizer(kinds[kind], args.srank_ratio), seed);
            TrainConfig cfg;
            cfg.lr = args.lr;
            cfg.momentum = args.momentum;
            cfg.epochs = args.epochs;
            cfg.batch_size = args.batch_size;
            cfg.seed = seed;
            cfg.stop.train_accuracy = args.stop_accuracy;
            const TrainHistory history = train(model, train_set, cfg, &test_set);
            const auto& last = history.epochs.back();
            sum_train[kind] += last.train_accuracy;
            sum_test[kind] += last.test_accuracy;
            csv << seed << ',' << kinds[kind] << ',' << format_real(last.train_accuracy) << ','
                << format_real(last.test_accuracy) << '\n';
        }
    }
    for (int kind = 0; kind < 3; ++kind) {
        csv << "mean," << kinds[kind] << ',' << format_real(sum_train[kind] / args.seeds) << ','
            << format_real(sum_test[kind] / args.seeds) << '\n';
    }
    csv << "gap,vanilla_minus_srn_train,"
        << format_real((sum_train[0] - sum_train[2]) / args.seeds) << ",\n";

    ShatteringOutcome out;
    out.csv = csv.str();
    out.mean_train_vanilla = sum_train[0] / args.seeds;
    out.mean_train_srn = sum_train[2] / args.seeds;
    out.mean_test_vanilla = sum_test[0] / args.seeds;
    out.mean_test_srn = sum_test[2] / args.seeds;
    return out;
}

inline int cmd_shattering(const ShatteringArgs& args) {
    const ShatteringOutcome out = run_shattering(args);
    write_file_atomic(args.output, out.csv);
    return kExitOk;
}

struct LowrankDemoArgs {
    std::string input;  // SPSD MAT1; empty means a generated example
    std::string output;
    std::size_t dim = 20;
    int matrix_rank = 8;
    int target_rank = 4;
    int sample_count = 0;
    int ensemble_runs = 4;
    std::uint64_t seed = 0;
};

inline int cmd_lowrank_demo(const LowrankDemoArgs& args) {
    DenseMatrix w;
    if (!args.input.empty()) {
        w = read_mat1(args.input);
    } else {
        std::mt19937_64 rng(args.seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        DenseMatrix b(args.dim, args.matrix_rank);
        for (double& x : b.data()) x = gauss(rng);
        w = matmul_nt(b, b);
    }
    NystromConfig cfg;
    cfg.target_rank = args.target_rank;
    cfg.sample_count = args.sample_count;
    cfg.ensemble_runs = args.ensemble_runs;
    cfg.seed = args.seed;
    const DenseMatrix exact = hard_threshold_rank(w, args.target_rank);
    const DenseMatrix approx = nystrom_lowrank(w, cfg);

    const auto eig = svd(approx);
    nlohmann::json j;
    j["schema"] = "srnkit/1";
    j["dim"] = w.rows();
    j["target_rank"] = args.target_rank;
    j["sample_count"] = cfg.resolve_samples();
    j["ensemble_runs"] = args.ensemble_runs;
    j["exact_error"] = format_real(frobenius_distance(w, exact));
    j["nystrom_error"] = format_real(frobenius_distance(w, approx));
    j["symmetry_residual"] = format_real(frobenius_distance(approx, transpose(approx)));
    j["sigma_tail"] = format_real(eig.sigma.size() > static_cast<std::size_t>(cfg.resolve_samples())
                                      ? eig.sigma[cfg.resolve_samples()]
                                      : 0.0);
    write_file_atomic(args.output, j.dump(2) + "\n");
    return kExitOk;
}

inline int run(const std::vector<std::string>& argv) {
    CLI::App app{"srnkit: stable rank normalization toolkit"};
    app.require_subcommand(1);

    NormalizeArgs nargs;
    auto* norm = app.add_subcommand("normalize", "stable-rank / spectral normalize a matrix");
    norm->add_option("--input", nargs.input)->required();
    norm->add_option("--output", nargs.output)->required();
    norm->add_option("--target-srank", nargs.target_srank);
    norm->add_option("--srank-ratio", nargs.srank_ratio);
    norm->add_option("--spectral-cap", nargs.spectral_cap);
    norm->add_option("--k", nargs.k);
    norm->add_option("--seed", nargs.seed);

    MeasureArgs margs;
    auto* meas = app.add_subcommand("measure", "compute generalization measures");
    meas->add_option("--model", margs.model)->required();
    meas->add_option("--data", margs.data)->required();
    meas->add_option("--output", margs.output)->required();
    meas->add_option("--noise-draws", margs.noise_draws);
    meas->add_option("--elhist-pairs", margs.elhist_pairs);
    meas->add_option("--seed", margs.seed);

    TrainArgs targs;
    auto* tr = app.add_subcommand("train", "train an MLP with optional SN/SRN hooks");
    tr->add_option("--data", targs.data);
    tr->add_option("--output", targs.output)->required();
    tr->add_option("--history", targs.history);
    tr->add_option("--n", targs.n);
    tr->add_option("--dim", targs.dim);
    tr->add_option("--classes", targs.classes);
    tr->add_option("--blob-sigma", targs.blob_sigma);
    tr->add_option("--center-scale", targs.center_scale);
    tr->add_option("--width", targs.width);
    tr->add_option("--depth", targs.depth);
    tr->add_option("--normalizer", targs.normalizer)
        ->check(CLI::IsMember({"none", "sn", "srn"}));
    tr->add_option("--srank-ratio", targs.srank_ratio);
    tr->add_option("--epochs", targs.epochs);
    tr->add_option("--lr", targs.lr);
    tr->add_option("--momentum", targs.momentum);
    tr->add_option("--weight-decay", targs.weight_decay);
    tr->add_option("--batch-size", targs.batch_size);
    tr->add_option("--stop-accuracy", targs.stop_accuracy);
    tr->add_option("--seed", targs.seed);

    ShatteringArgs sargs;
    auto* sh = app.add_subcommand("shattering", "random-label memorization experiment");
    sh->add_option("--output", sargs.output)->required();
    sh->add_option("--n", sargs.n);
    sh->add_option("--dim", sargs.dim);
    sh->add_option("--classes", sargs.classes);
    sh->add_option("--width", sargs.width);
    sh->add_option("--epochs", sargs.epochs);
    sh->add_option("--seeds", sargs.seeds);
    sh->add_option("--lr", sargs.lr);
    sh->add_option("--srank-ratio", sargs.srank_ratio);
    sh->add_option("--batch-size", sargs.batch_size);
    sh->add_option("--blob-sigma", sargs.blob_sigma);
    sh->add_option("--center-scale", sargs.center_scale);
    sh->add_option("--stop-accuracy", sargs.stop_accuracy);
    sh->add_flag("--clean", sargs.clean, "keep true labels");
    sh->add_option("--seed", sargs.seed);

    LowrankDemoArgs largs;
    auto* lr = app.add_subcommand("lowrank-demo", "Nystrom vs exact rank projection");
    lr->add_option("--input", largs.input);
    lr->add_option("--output", largs.output)->required();
    lr->add_option("--dim", largs.dim);
    lr->add_option("--matrix-rank", largs.matrix_rank);
    lr->add_option("--target-rank", largs.target_rank);
    lr->add_option("--sample-count", largs.sample_count);
    lr->add_option("--ensemble-runs", largs.ensemble_runs);
    lr->add_option("--seed", largs.seed);

    try {
        std::vector<std::string> reversed(argv.rbegin(), argv.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kExitParse;
    }

    try {
        if (norm->parsed()) return cmd_normalize(nargs);
        if (meas->parsed()) return cmd_measure(margs);
        if (tr->parsed()) return cmd_train(targs);
        if (sh->parsed()) return cmd_shattering(sargs);
        if (lr->parsed()) return cmd_lowrank_demo(largs);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitParse;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitShape;
    }
    return kExitParse;
}

}  // namespace srnkit::cli

#endif
