#ifndef SRNKIT_IO_HPP
#define SRNKIT_IO_HPP

//
// File formats: MAT1 text matrices, DS1 datasets, model checkpoints
// (JSON header + MAT1 blocks), and the versioned JSON measure report.
// All writers go through write_file_atomic.
//

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "srnkit/matrix.hpp"
#include "srnkit/measures.hpp"
#include "srnkit/mlp.hpp"

namespace srnkit {

// Fixed decimal rendering (12 significant digits) so re-runs are
// byte-identical.
inline std::string format_real(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ParseError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw ParseError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// --- MAT1: "rows cols" then row-major whitespace-separated values ---

inline std::string mat1_to_string(const DenseMatrix& m) {
    std::ostringstream out;
    out << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        for (std::size_t j = 0; j < row.size(); ++j)
            out << (j ? " " : "") << format_real(row[j]);
        out << '\n';
    }
    return out.str();
}

inline DenseMatrix mat1_from_stream(std::istream& in) {
    long long rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows <= 0 || cols <= 0)
        throw ParseError("MAT1: bad header line");
    std::vector<double> data;
    data.reserve(rows * cols);
    double v = 0.0;
    for (long long i = 0; i < rows * cols; ++i) {
        if (!(in >> v)) throw ParseError("MAT1: fewer values than rows*cols");
        data.push_back(v);
    }
    return DenseMatrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                       std::move(data));
}

inline DenseMatrix mat1_from_string(const std::string& text) {
    std::istringstream in(text);
    DenseMatrix m = mat1_from_stream(in);
    double extra = 0.0;
    if (in >> extra) throw ParseError("MAT1: more values than rows*cols");
    return m;
}

inline DenseMatrix read_mat1(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return mat1_from_string(buf.str());
}

inline void write_mat1(const std::filesystem::path& path, const DenseMatrix& m) {
    write_file_atomic(path, mat1_to_string(m));
}

// --- DS1 dataset: "DS1 n d k" header, n*d inputs, n integer labels ---

inline std::string ds1_to_string(const Dataset& data) {
    std::ostringstream out;
    out << "DS1 " << data.inputs.rows() << ' ' << data.inputs.cols() << ' ' << data.num_classes
        << '\n';
    for (std::size_t i = 0; i < data.inputs.rows(); ++i) {
        auto row = data.inputs.row(i);
        for (std::size_t j = 0; j < row.size(); ++j)
            out << (j ? " " : "") << format_real(row[j]);
        out << '\n';
    }
    for (std::size_t i = 0; i < data.labels.size(); ++i)
        out << (i ? " " : "") << data.labels[i];
    out << '\n';
    return out.str();
}

inline Dataset ds1_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string magic;
    long long n = 0, d = 0, k = 0;
    if (!(in >> magic >> n >> d >> k) || magic != "DS1" || n <= 0 || d <= 0 || k <= 0)
        throw ParseError("DS1: bad header");
    Dataset data;
    data.inputs = DenseMatrix(n, d);
    data.num_classes = static_cast<int>(k);
    for (double& x : data.inputs.data())
        if (!(in >> x)) throw ParseError("DS1: truncated inputs");
    data.labels.resize(n);
    for (int& y : data.labels) {
        if (!(in >> y)) throw ParseError("DS1: truncated labels");
        if (y < 0 || y >= k) throw ParseError("DS1: label out of range");
    }
    return data;
}

inline Dataset read_ds1(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return ds1_from_string(buf.str());
}

inline void write_ds1(const std::filesystem::path& path, const Dataset& data) {
    write_file_atomic(path, ds1_to_string(data));
}

// --- Model checkpoint: one-line JSON header, then per layer a MAT1 weight
// block and a 1 x out MAT1 bias block ---

inline std::string checkpoint_to_string(const MlpModel& model) {
    nlohmann::json header;
    header["format"] = "srnkit/1";
    header["normalizer"] = model.normalizer.kind == NormalizerKind::none ? "none"
                           : model.normalizer.kind == NormalizerKind::sn ? "sn"
                                                                         : "srn";
    header["srank_ratio"] = format_real(model.normalizer.srank_ratio);
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& layer : model.layers) {
        layers.push_back({{"out", layer.weight.rows()},
                          {"in", layer.weight.cols()},
                          {"activation",
                           layer.act == Activation::relu ? "relu" : "identity"}});
    }
    header["layers"] = layers;

    std::ostringstream out;
    out << header.dump() << '\n';
    for (const Layer& layer : model.layers) {
        out << mat1_to_string(layer.weight);
        DenseMatrix bias(1, layer.bias.size(), layer.bias);
        out << mat1_to_string(bias);
    }
    return out.str();
}

inline MlpModel checkpoint_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string header_line;
    if (!std::getline(in, header_line)) throw ParseError("checkpoint: missing header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: bad JSON header: ") + e.what());
    }
    if (header.value("format", "") != "srnkit/1")
        throw ParseError("checkpoint: unknown format tag");

    MlpModel model;
    const std::string norm = header.value("normalizer", "none");
    model.normalizer.kind = norm == "sn"    ? NormalizerKind::sn
                            : norm == "srn" ? NormalizerKind::srn
                                            : NormalizerKind::none;
    if (header.contains("srank_ratio"))
        model.normalizer.srank_ratio = std::stod(header["srank_ratio"].get<std::string>());

    for (const auto& spec : header.at("layers")) {
        Layer layer;
        layer.weight = mat1_from_stream(in);
        DenseMatrix bias = mat1_from_stream(in);
        if (layer.weight.rows() != spec.at("out").get<std::size_t>() ||
            layer.weight.cols() != spec.at("in").get<std::size_t>() ||
            bias.rows() != 1 || bias.cols() != layer.weight.rows())
            throw ParseError("checkpoint: block shape disagrees with header");
        layer.bias.assign(bias.row(0).begin(), bias.row(0).end());
        layer.act = spec.at("activation") == "relu" ? Activation::relu : Activation::identity;
        model.layers.push_back(std::move(layer));
        model.norm_states.emplace_back();
    }
    if (model.layers.empty()) throw ParseError("checkpoint: no layers");
    for (std::size_t i = 1; i < model.layers.size(); ++i)
        if (model.layers[i].weight.cols() != model.layers[i - 1].weight.rows())
            throw ParseError("checkpoint: layer dimensions do not chain");
    return model;
}

inline MlpModel read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_string(buf.str());
}

inline void write_checkpoint(const std::filesystem::path& path, const MlpModel& model) {
    write_file_atomic(path, checkpoint_to_string(model));
}

// --- Measure report, schema "srnkit/1"; floats serialized as decimal
// strings with 12 significant digits ---

namespace detail {

inline nlohmann::json real_array(const std::vector<double>& xs) {
    nlohmann::json arr = nlohmann::json::array();
    for (double x : xs) arr.push_back(format_real(x));
    return arr;
}

inline std::vector<double> parse_real_array(const nlohmann::json& arr) {
    std::vector<double> out;
    for (const auto& x : arr) out.push_back(std::stod(x.get<std::string>()));
    return out;
}

}  // namespace detail

inline nlohmann::json report_to_json(const MeasureReport& r) {
    nlohmann::json j;
    j["schema"] = "srnkit/1";
    j["per_sample_margins"] = detail::real_array(r.per_sample_margins);
    j["spec_fro_p90_log"] = format_real(r.spec_fro_p90);
    j["spec_l1_p90_log"] = format_real(r.spec_l1_p90);
    j["jac_norm"] = detail::real_array(r.jac_norm);
    j["noise_sensitivity"] = format_real(r.noise_sensitivity);
    j["noise_sensitivity_std_error"] = format_real(r.noise_sensitivity_std_error);
    j["layer_cushions"] = detail::real_array(r.layer_cushions);
    j["lipschitz_upper"] = format_real(r.lipschitz_upper);
    j["elhist"] = detail::real_array(r.elhist);
    j["elhist_p95"] = format_real(r.elhist_p95);
    j["zero_margin_count"] = r.zero_margin_count;
    return j;
}

inline MeasureReport report_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "srnkit/1") throw ParseError("report: unknown schema");
    MeasureReport r;
    r.per_sample_margins = detail::parse_real_array(j.at("per_sample_margins"));
    r.spec_fro_p90 = std::stod(j.at("spec_fro_p90_log").get<std::string>());
    r.spec_l1_p90 = std::stod(j.at("spec_l1_p90_log").get<std::string>());
    r.jac_norm = detail::parse_real_array(j.at("jac_norm"));
    r.noise_sensitivity = std::stod(j.at("noise_sensitivity").get<std::string>());
    r.noise_sensitivity_std_error =
        std::stod(j.at("noise_sensitivity_std_error").get<std::string>());
    r.layer_cushions = detail::parse_real_array(j.at("layer_cushions"));
    r.lipschitz_upper = std::stod(j.at("lipschitz_upper").get<std::string>());
    r.elhist = detail::parse_real_array(j.at("elhist"));
    r.elhist_p95 = std::stod(j.at("elhist_p95").get<std::string>());
    r.zero_margin_count = j.at("zero_margin_count").get<int>();
    return r;
}

}  // namespace srnkit

#endif
