#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "srnkit/cli.hpp"

using namespace srnkit;
using oracles::random_matrix;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("srnkit_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

TEST_CASE("normalize subcommand on the identity matrix") {
    TempDir tmp;
    write_mat1(tmp.file("w.mat"), DenseMatrix::identity(3));
    const int rc = cli::run({"normalize", "--input", tmp.file("w.mat"), "--output",
                             tmp.file("out.mat"), "--target-srank", "2", "--k", "0"});
    REQUIRE(rc == cli::kExitOk);

    const DenseMatrix out = read_mat1(tmp.file("out.mat"));
    CHECK(stable_rank(out) == doctest::Approx(2.0).epsilon(1e-9));

    const auto sidecar = nlohmann::json::parse(slurp(tmp.file("out.mat.json")));
    CHECK(sidecar.at("schema") == "srnkit/1");
    CHECK(std::stod(sidecar.at("stable_rank_before").get<std::string>()) ==
          doctest::Approx(3.0).epsilon(1e-10));
    CHECK(std::stod(sidecar.at("stable_rank_after").get<std::string>()) ==
          doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::stod(sidecar.at("frobenius_distance").get<std::string>()) ==
          doctest::Approx(0.292893218813).epsilon(1e-6));
    CHECK(sidecar.at("was_noop") == false);
    const double g1 = std::stod(sidecar.at("gamma1").get<std::string>());
    const double g2 = std::stod(sidecar.at("gamma2").get<std::string>());
    CHECK(g1 >= 1.0);
    CHECK(g2 <= 1.0);
}

TEST_CASE("normalize with only a spectral cap clips sigma1") {
    TempDir tmp;
    write_mat1(tmp.file("w.mat"), DenseMatrix::diag({2.0, 1.0}));
    const int rc = cli::run({"normalize", "--input", tmp.file("w.mat"), "--output",
                             tmp.file("out.mat"), "--spectral-cap", "1"});
    REQUIRE(rc == cli::kExitOk);
    const DenseMatrix out = read_mat1(tmp.file("out.mat"));
    CHECK(frobenius_distance(out, DenseMatrix::identity(2)) <= 1e-9);
    const auto sidecar = nlohmann::json::parse(slurp(tmp.file("out.mat.json")));
    CHECK(std::stod(sidecar.at("sigma1_after").get<std::string>()) ==
          doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::stod(sidecar.at("sigma1_before").get<std::string>()) ==
          doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("normalize reruns are byte identical") {
    TempDir tmp;
    write_mat1(tmp.file("w.mat"), random_matrix(4, 4, 3));
    const std::vector<std::string> args{"normalize", "--input", tmp.file("w.mat"),
                                        "--output",  tmp.file("a.mat"), "--target-srank", "2.5"};
    REQUIRE(cli::run(args) == cli::kExitOk);
    std::vector<std::string> again = args;
    again[4] = tmp.file("b.mat");
    REQUIRE(cli::run(again) == cli::kExitOk);
    CHECK(slurp(tmp.file("a.mat")) == slurp(tmp.file("b.mat")));
    CHECK(slurp(tmp.file("a.mat.json")) == slurp(tmp.file("b.mat.json")));
}

TEST_CASE("exit code 2 on usage and parse errors") {
    TempDir tmp;
    CHECK(cli::run({"no-such-command"}) == cli::kExitParse);
    CHECK(cli::run({"normalize", "--input", tmp.file("w.mat")}) == cli::kExitParse);
    CHECK(cli::run({"train", "--output", tmp.file("m.ckpt"), "--normalizer", "bogus"}) ==
          cli::kExitParse);
    spit(tmp.file("bad.mat"), "not a matrix\n");
    CHECK(cli::run({"normalize", "--input", tmp.file("bad.mat"), "--output",
                    tmp.file("out.mat"), "--target-srank", "2"}) == cli::kExitParse);
}

TEST_CASE("exit code 3 on an infeasible target") {
    TempDir tmp;
    write_mat1(tmp.file("w.mat"), DenseMatrix::diag({2.0, 2.0, 1.0}));
    CHECK(cli::run({"normalize", "--input", tmp.file("w.mat"), "--output", tmp.file("out.mat"),
                    "--target-srank", "1.5", "--k", "2"}) == cli::kExitInfeasible);
}

TEST_CASE("exit code 4 on a shape mismatch") {
    TempDir tmp;
    const MlpModel model = make_mlp({4, 5, 2}, Activation::relu, NormalizerSpec{}, 1);
    write_checkpoint(tmp.file("m.ckpt"), model);
    Dataset data;
    data.inputs = random_matrix(6, 3, 2);  // wrong width
    data.labels.assign(6, 0);
    data.num_classes = 2;
    write_ds1(tmp.file("d.ds1"), data);
    CHECK(cli::run({"measure", "--model", tmp.file("m.ckpt"), "--data", tmp.file("d.ds1"),
                    "--output", tmp.file("r.json")}) == cli::kExitShape);
}

TEST_CASE("train then measure round trip") {
    TempDir tmp;
    REQUIRE(cli::run({"train", "--output", tmp.file("m.ckpt"), "--history", tmp.file("h.csv"),
                      "--n", "120", "--dim", "4", "--classes", "3", "--width", "8",
                      "--epochs", "3", "--batch-size", "32", "--normalizer", "srn",
                      "--seed", "5"}) == cli::kExitOk);

    const MlpModel model = read_checkpoint(tmp.file("m.ckpt"));
    REQUIRE(model.layers.size() == 2);
    CHECK(model.layers[0].weight.cols() == 4);
    CHECK(model.layers[1].weight.rows() == 3);
    CHECK(model.normalizer.kind == NormalizerKind::srn);

    const std::string csv = slurp(tmp.file("h.csv"));
    CHECK(csv.rfind("epoch,train_loss,train_accuracy,test_loss,test_accuracy\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 epochs

    // dataset the model can consume
    const DenseMatrix centers = cli::default_blob_centers(3, 4, 10.0, 5);
    write_ds1(tmp.file("d.ds1"), make_blobs(40, 3, centers, 1.0, 9));
    REQUIRE(cli::run({"measure", "--model", tmp.file("m.ckpt"), "--data", tmp.file("d.ds1"),
                      "--output", tmp.file("r.json"), "--noise-draws", "50",
                      "--elhist-pairs", "100"}) == cli::kExitOk);
    const auto rep = nlohmann::json::parse(slurp(tmp.file("r.json")));
    CHECK(rep.at("schema") == "srnkit/1");
    CHECK(rep.at("per_sample_margins").size() == 40);
    CHECK(rep.at("elhist").size() == 100);
    const MeasureReport parsed = report_from_json(rep);
    CHECK(parsed.lipschitz_upper > 0.0);
    // round trip through the struct re-serializes identically
    CHECK(report_to_json(parsed) == rep);
}

TEST_CASE("checkpoint reruns are byte identical") {
    TempDir tmp;
    const std::vector<std::string> base{
        "train", "--output", "", "--n", "80", "--dim", "3", "--classes", "2",
        "--width", "6", "--epochs", "2", "--batch-size", "16", "--seed", "7"};
    std::vector<std::string> a = base;
    a[2] = tmp.file("a.ckpt");
    std::vector<std::string> b = base;
    b[2] = tmp.file("b.ckpt");
    REQUIRE(cli::run(a) == cli::kExitOk);
    REQUIRE(cli::run(b) == cli::kExitOk);
    CHECK(slurp(tmp.file("a.ckpt")) == slurp(tmp.file("b.ckpt")));
}

TEST_CASE("shattering subcommand writes the expected CSV shape") {
    TempDir tmp;
    REQUIRE(cli::run({"shattering", "--output", tmp.file("s.csv"), "--n", "60", "--dim", "4",
                      "--classes", "3", "--width", "8", "--epochs", "2", "--seeds", "1",
                      "--batch-size", "16", "--clean"}) == cli::kExitOk);
    const std::string csv = slurp(tmp.file("s.csv"));
    CHECK(csv.rfind("seed,normalizer,final_train_accuracy,test_accuracy\n", 0) == 0);
    // 1 seed x 3 normalizers + 3 mean rows + 1 gap row + header
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
    CHECK(csv.find(",none,") != std::string::npos);
    CHECK(csv.find(",sn,") != std::string::npos);
    CHECK(csv.find(",srn,") != std::string::npos);
    CHECK(csv.find("gap,vanilla_minus_srn_train,") != std::string::npos);
}

TEST_CASE("lowrank-demo reports errors for both paths") {
    TempDir tmp;
    REQUIRE(cli::run({"lowrank-demo", "--output", tmp.file("d.json"), "--dim", "12",
                      "--matrix-rank", "5", "--target-rank", "3", "--ensemble-runs", "2",
                      "--seed", "4"}) == cli::kExitOk);
    const auto j = nlohmann::json::parse(slurp(tmp.file("d.json")));
    CHECK(j.at("schema") == "srnkit/1");
    CHECK(j.at("dim") == 12);
    const double exact = std::stod(j.at("exact_error").get<std::string>());
    const double approx = std::stod(j.at("nystrom_error").get<std::string>());
    CHECK(exact >= 0.0);
    CHECK(approx >= exact - 1e-9);  // exact truncation is optimal
    CHECK(std::stod(j.at("symmetry_residual").get<std::string>()) <= 1e-10);

    // explicit SPSD input path
    write_mat1(tmp.file("w.mat"), matmul_nt(random_matrix(8, 3, 2), random_matrix(8, 3, 2)));
    REQUIRE(cli::run({"lowrank-demo", "--input", tmp.file("w.mat"), "--output",
                      tmp.file("d2.json"), "--target-rank", "3", "--sample-count", "8"}) ==
            cli::kExitOk);
    const auto j2 = nlohmann::json::parse(slurp(tmp.file("d2.json")));
    // rank-3 input, rank-3 target, full sampling: both errors are ~0
    CHECK(std::stod(j2.at("nystrom_error").get<std::string>()) <= 1e-6);
}

TEST_CASE("DS1 round trip") {
    const DenseMatrix centers{{1.0, 0.0}, {-1.0, 0.0}};
    const Dataset data = make_blobs(30, 2, centers, 0.5, 11);
    const Dataset back = ds1_from_string(ds1_to_string(data));
    CHECK(frobenius_distance(data.inputs, back.inputs) <= 1e-10);
    CHECK(data.labels == back.labels);
    CHECK(back.num_classes == 2);
    CHECK_THROWS_AS(ds1_from_string("DS1 2 2 2\n1 2\n3 4\n0 5\n"), ParseError);
    CHECK_THROWS_AS(ds1_from_string("XX 2 2 2\n1 2\n3 4\n0 1\n"), ParseError);
}

TEST_CASE("checkpoint round trip preserves the model") {
    MlpModel model = make_mlp({3, 6, 2}, Activation::relu,
                              NormalizerSpec{NormalizerKind::srn, 0.4}, 8);
    model.layers[0].bias[1] = 0.25;
    const MlpModel back = checkpoint_from_string(checkpoint_to_string(model));
    REQUIRE(back.layers.size() == 2);
    CHECK(back.normalizer.kind == NormalizerKind::srn);
    CHECK(back.normalizer.srank_ratio == doctest::Approx(0.4).epsilon(1e-12));
    for (std::size_t li = 0; li < 2; ++li) {
        CHECK(frobenius_distance(back.layers[li].weight, model.layers[li].weight) <=
              1e-10 * frobenius_norm(model.layers[li].weight));
        CHECK(back.layers[li].act == model.layers[li].act);
    }
    CHECK(back.layers[0].bias[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_THROWS_AS(checkpoint_from_string("{\"format\":\"other\"}\n"), ParseError);
}
