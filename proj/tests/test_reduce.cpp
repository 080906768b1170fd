#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "opclass/opclass.hpp"
#include "oracles.hpp"

namespace {

Eigen::MatrixXd random_counts(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    opclass::SplitRng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = double(rng.below(40));
    return m;
}

opclass::ReducerModel roundtrip(const opclass::ReducerModel& model) {
    const auto path = std::filesystem::temp_directory_path() / "opclass_reducer.bin";
    {
        opclass::BinaryWriter out(path);
        model.save(out);
        out.close();
    }
    opclass::BinaryReader in(path);
    auto back = opclass::ReducerModel::load(in);
    std::filesystem::remove(path);
    return back;
}

} // namespace

TEST_CASE("reducer tokens round-trip", "[reduce]") {
    for (const auto kind : {opclass::ReducerKind::none, opclass::ReducerKind::variance,
                            opclass::ReducerKind::ae1, opclass::ReducerKind::ae3})
        REQUIRE(opclass::reducer_from_token(opclass::reducer_token(kind)) == kind);
    REQUIRE_THROWS_AS(opclass::reducer_from_token("pca"), opclass::ConfigError);
}

TEST_CASE("population variance is the biased per-column moment", "[reduce]") {
    Eigen::MatrixXd x(4, 2);
    x << 0, 5, 1, 5, 0, 5, 1, 5;
    REQUIRE(opclass::population_variance(x, 0) == 0.25);
    REQUIRE(opclass::population_variance(x, 1) == 0.0);
}

TEST_CASE("variance filter keeps columns at or above the threshold", "[reduce]") {
    Eigen::MatrixXd x(4, 3);
    x << 0, 5, 0,
         1, 5, 10,
         0, 5, 20,
         1, 5, 30;
    opclass::ReducerSpec spec;
    spec.kind = opclass::ReducerKind::variance;
    spec.threshold = 0.25; // exactly the variance of column 0: boundary stays in
    const auto model = opclass::fit_reducer(x, spec, 0);
    REQUIRE(model.kept == std::vector<Eigen::Index>{0, 2});
    REQUIRE(model.output_dim() == 2);
    const auto out = model.apply(x);
    REQUIRE(out.cols() == 2);
    REQUIRE(out.col(0) == x.col(0));
    REQUIRE(out.col(1) == x.col(2));

    spec.threshold = 0.250000001; // just past the boundary
    REQUIRE(opclass::fit_reducer(x, spec, 0).kept == std::vector<Eigen::Index>{2});
}

TEST_CASE("an all-constant matrix leaves no features", "[reduce]") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Constant(6, 4, 3.0);
    opclass::ReducerSpec spec;
    spec.kind = opclass::ReducerKind::variance;
    REQUIRE_THROWS_AS(opclass::fit_reducer(x, spec, 0), opclass::EmptyFeatureSet);
}

TEST_CASE("variance filter agrees with an independent oracle", "[reduce]") {
    opclass::SplitRng rng(1200);
    for (int rep = 0; rep < 25; ++rep) {
        const auto x = random_counts(50, 30, rng.next_u64());
        double max_var = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            max_var = std::max(max_var, opclass::population_variance(x, j));
        opclass::ReducerSpec spec;
        spec.kind = opclass::ReducerKind::variance;
        spec.threshold = rng.uniform(0.0, max_var * 0.9);
        const auto model = opclass::fit_reducer(x, spec, 0);
        REQUIRE(model.kept == oracle::variance_keep(x, spec.threshold));
    }
}

TEST_CASE("the none reducer is a pure pass-through", "[reduce]") {
    const auto x = random_counts(8, 5, 77);
    const auto model = opclass::fit_reducer(x, {}, 3);
    REQUIRE(model.output_dim() == 5);
    REQUIRE((model.apply(x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reducers reject mismatched apply width", "[reduce]") {
    const auto x = random_counts(8, 5, 78);
    const auto model = opclass::fit_reducer(x, {}, 3);
    REQUIRE_THROWS_AS(model.apply(random_counts(2, 4, 79)), opclass::ShapeMismatch);
}

TEST_CASE("one-hidden-layer autoencoder keeps a 32-wide code on 32 inputs", "[reduce]") {
    const auto x = random_counts(40, 32, 500);
    opclass::ReducerSpec spec;
    spec.kind = opclass::ReducerKind::ae1;
    spec.train.epochs = 25;
    spec.train.batch_size = 16;
    spec.train.validation_fraction = 0.0;
    const auto model = opclass::fit_reducer(x, spec, 11);
    REQUIRE(model.net.spec.layer_widths == std::vector<Eigen::Index>{32, 32, 32});
    REQUIRE(model.encoder_depth == 1);
    REQUIRE(model.output_dim() == 32);
    const auto code = model.apply(x);
    REQUIRE(code.rows() == 40);
    REQUIRE(code.cols() == 32);

    // training must beat the untrained reconstruction from the same init
    opclass::ReducerSpec frozen = spec;
    frozen.train.epochs = 0;
    const auto init = opclass::fit_reducer(x, frozen, 11);
    const auto scaled = model.scaler.transform(x);
    const double trained =
        opclass::nn::loss_value(opclass::nn::Loss::mse, model.net.forward(scaled), scaled);
    const double untrained =
        opclass::nn::loss_value(opclass::nn::Loss::mse, init.net.forward(scaled), scaled);
    REQUIRE(trained < untrained);
}

TEST_CASE("three-hidden-block autoencoder narrows through the stated widths", "[reduce]") {
    const auto x = random_counts(30, 20, 510);
    opclass::ReducerSpec spec;
    spec.kind = opclass::ReducerKind::ae3;
    spec.bottleneck = 8;
    spec.train.epochs = 2;
    spec.train.batch_size = 8;
    const auto model = opclass::fit_reducer(x, spec, 12);
    REQUIRE(model.net.spec.layer_widths ==
            std::vector<Eigen::Index>{20, 128, 64, 8, 64, 128, 20});
    REQUIRE(model.encoder_depth == 3);
    REQUIRE(model.output_dim() == 8);
    // every layer is ELU except the linear reconstruction head
    for (std::size_t l = 0; l + 1 < model.net.depth(); ++l)
        REQUIRE(model.net.spec.activations[l] == opclass::nn::Activation::elu);
    REQUIRE(model.net.spec.activations.back() == opclass::nn::Activation::linear);
    REQUIRE(model.net.spec.dropout_rate == 0.0);
    REQUIRE(model.apply(x).cols() == 8);
}

TEST_CASE("autoencoder codes are deterministic in the seed", "[reduce]") {
    const auto x = random_counts(20, 10, 520);
    opclass::ReducerSpec spec;
    spec.kind = opclass::ReducerKind::ae1;
    spec.bottleneck = 4;
    spec.train.epochs = 3;
    const auto a = opclass::fit_reducer(x, spec, 9);
    const auto b = opclass::fit_reducer(x, spec, 9);
    REQUIRE((a.apply(x) - b.apply(x)).cwiseAbs().maxCoeff() == 0.0);
    const auto c = opclass::fit_reducer(x, spec, 10);
    REQUIRE((a.apply(x) - c.apply(x)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("fitted reducers survive the disk round-trip", "[reduce]") {
    const auto x = random_counts(25, 12, 530);

    opclass::ReducerSpec vt;
    vt.kind = opclass::ReducerKind::variance;
    vt.threshold = 1.0;
    const auto vt_model = opclass::fit_reducer(x, vt, 0);
    const auto vt_back = roundtrip(vt_model);
    REQUIRE(vt_back.kept == vt_model.kept);
    REQUIRE((vt_back.apply(x) - vt_model.apply(x)).cwiseAbs().maxCoeff() == 0.0);

    opclass::ReducerSpec ae;
    ae.kind = opclass::ReducerKind::ae1;
    ae.bottleneck = 5;
    ae.train.epochs = 2;
    const auto ae_model = opclass::fit_reducer(x, ae, 1);
    const auto ae_back = roundtrip(ae_model);
    REQUIRE(ae_back.encoder_depth == ae_model.encoder_depth);
    REQUIRE((ae_back.apply(x) - ae_model.apply(x)).cwiseAbs().maxCoeff() == 0.0);

    const auto none_model = opclass::fit_reducer(x, {}, 2);
    const auto none_back = roundtrip(none_model);
    REQUIRE((none_back.apply(x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reducer training traces are exposed to the caller", "[reduce]") {
    const auto x = random_counts(30, 10, 540);
    opclass::ReducerSpec spec;
    spec.kind = opclass::ReducerKind::ae1;
    spec.bottleneck = 4;
    spec.train.epochs = 6;
    opclass::nn::TrainingTrace trace;
    opclass::fit_reducer(x, spec, 13, &trace);
    REQUIRE(trace.train_loss.size() == 6);
    REQUIRE(trace.val_loss.size() == 6);
    REQUIRE(trace.train_loss.back() < trace.train_loss.front());
}

TEST_CASE("reducer fitting rejects empty input and bad bottlenecks", "[reduce]") {
    Eigen::MatrixXd empty(0, 4);
    REQUIRE_THROWS_AS(opclass::fit_reducer(empty, {}, 0), opclass::TooFewRows);
    opclass::ReducerSpec spec;
    spec.kind = opclass::ReducerKind::ae1;
    spec.bottleneck = 0;
    REQUIRE_THROWS_AS(opclass::fit_reducer(random_counts(4, 4, 1), spec, 0), opclass::ConfigError);
}
