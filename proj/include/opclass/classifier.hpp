#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "opclass/errors.hpp"
#include "opclass/forest.hpp"
#include "opclass/io.hpp"
#include "opclass/neural.hpp"
#include "opclass/rng.hpp"

namespace opclass {

enum class ClassifierKind : std::uint8_t { rf = 0, dnn2 = 1, dnn4 = 2, dnn7 = 3 };

inline const char* classifier_token(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::rf: return "rf";
        case ClassifierKind::dnn2: return "dnn2";
        case ClassifierKind::dnn4: return "dnn4";
        case ClassifierKind::dnn7: return "dnn7";
    }
    throw ConfigError("unknown classifier kind");
}

inline ClassifierKind classifier_from_token(std::string_view tok) {
    if (tok == "rf") return ClassifierKind::rf;
    if (tok == "dnn2") return ClassifierKind::dnn2;
    if (tok == "dnn4") return ClassifierKind::dnn4;
    if (tok == "dnn7") return ClassifierKind::dnn7;
    throw ConfigError("unknown classifier '" + std::string(tok) +
                      "' (expected rf, dnn2, dnn4 or dnn7)");
}

inline std::vector<Eigen::Index> dnn_hidden_widths(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::dnn2: return {1024, 32};
        case ClassifierKind::dnn4: return {1024, 256, 64, 16};
        case ClassifierKind::dnn7: return {1024, 512, 256, 128, 64, 32, 16};
        case ClassifierKind::rf: break;
    }
    throw ConfigError("classifier has no dense architecture");
}

inline nn::NetworkSpec dnn_spec(ClassifierKind k, Eigen::Index input_dim, double dropout = 0.1) {
    nn::NetworkSpec spec;
    spec.layer_widths.push_back(input_dim);
    for (const auto w : dnn_hidden_widths(k)) {
        spec.layer_widths.push_back(w);
        spec.activations.push_back(nn::Activation::elu);
    }
    spec.layer_widths.push_back(1);
    spec.activations.push_back(nn::Activation::sigmoid);
    spec.dropout_rate = dropout;
    spec.loss = nn::Loss::bce;
    return spec;
}

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::rf;
    RandomForestConfig forest;
    nn::TrainConfig train;
    double dropout = 0.1; // dense nets only
};

// A trained model: either a forest over raw features or a sigmoid-head dense
// net over scaled features. Probabilities refer to label 1 (malware).
struct ClassifierModel {
    ClassifierKind kind = ClassifierKind::rf;
    Eigen::Index input_dim = 0;
    RandomForest forest;
    nn::FeatureScaler scaler;
    nn::Network net;

    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const {
        if (x.cols() != input_dim)
            throw ShapeMismatch("ShapeMismatch: classifier trained on " + std::to_string(input_dim) +
                                " features, got " + std::to_string(x.cols()));
        if (kind == ClassifierKind::rf) return forest.predict_proba(x);
        return net.forward(scaler.transform(x)).col(0);
    }

    std::vector<int> predict(const Eigen::MatrixXd& x) const {
        const Eigen::VectorXd p = predict_proba(x);
        std::vector<int> out(static_cast<std::size_t>(p.size()));
        for (Eigen::Index i = 0; i < p.size(); ++i)
            out[static_cast<std::size_t>(i)] = p(i) >= 0.5 ? 1 : 0;
        return out;
    }

    void save(BinaryWriter& out) const {
        out.magic("OPCLASS-CL1");
        out.u8(static_cast<std::uint8_t>(kind));
        out.u64(static_cast<std::uint64_t>(input_dim));
        if (kind == ClassifierKind::rf) {
            forest.save(out);
        } else {
            scaler.save(out);
            net.save(out);
        }
    }

    static ClassifierModel load(BinaryReader& in) {
        in.expect_magic("OPCLASS-CL1");
        ClassifierModel m;
        const auto kind = in.u8();
        if (kind > 3) throw FormatViolation("unknown classifier id " + std::to_string(kind));
        m.kind = static_cast<ClassifierKind>(kind);
        m.input_dim = static_cast<Eigen::Index>(in.u64());
        if (m.kind == ClassifierKind::rf) {
            m.forest = RandomForest::load(in);
            if (m.forest.n_features != m.input_dim)
                throw FormatViolation("forest feature count does not match header");
        } else {
            m.scaler = nn::FeatureScaler::load(in);
            m.net = nn::Network::load(in);
            if (m.net.spec.input_dim() != m.input_dim)
                throw FormatViolation("network input width does not match header");
        }
        return m;
    }
};

inline ClassifierModel train_classifier(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                        const ClassifierSpec& spec, std::uint64_t seed,
                                        nn::TrainingTrace* trace = nullptr) {
    if (x.rows() == 0) throw TooFewRows("TooFewRows: classifier needs at least one row");
    if (static_cast<std::size_t>(x.rows()) != labels.size())
        throw ShapeMismatch("ShapeMismatch: labels do not match matrix rows");

    ClassifierModel model;
    model.kind = spec.kind;
    model.input_dim = x.cols();
    if (spec.kind == ClassifierKind::rf) {
        RandomForestConfig fc = spec.forest;
        fc.seed = seed;
        model.forest = train_forest(x, labels, fc);
        return model;
    }

    model.scaler.fit(x);
    const Eigen::MatrixXd scaled = model.scaler.transform(x);
    Eigen::MatrixXd y(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, 0) = labels[static_cast<std::size_t>(i)];
    SplitRng init_rng(derive_seed(seed, "init"));
    model.net = nn::Network::glorot(dnn_spec(spec.kind, x.cols(), spec.dropout), init_rng);
    nn::TrainConfig tc = spec.train;
    tc.seed = derive_seed(seed, "train");
    const auto tr = nn::train(model.net, scaled, y, tc);
    if (trace) *trace = tr;
    return model;
}

} // namespace opclass
