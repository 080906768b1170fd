#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "opclass/errors.hpp"
#include "opclass/io.hpp"
#include "opclass/neural.hpp"
#include "opclass/rng.hpp"

namespace opclass {

enum class ReducerKind : std::uint8_t { none = 0, variance = 1, ae1 = 2, ae3 = 3 };

inline const char* reducer_token(ReducerKind k) {
    switch (k) {
        case ReducerKind::none: return "none";
        case ReducerKind::variance: return "vt";
        case ReducerKind::ae1: return "ae1";
        case ReducerKind::ae3: return "ae3";
    }
    throw ConfigError("unknown reducer kind");
}

inline ReducerKind reducer_from_token(std::string_view tok) {
    if (tok == "none") return ReducerKind::none;
    if (tok == "vt") return ReducerKind::variance;
    if (tok == "ae1") return ReducerKind::ae1;
    if (tok == "ae3") return ReducerKind::ae3;
    throw ConfigError("unknown reducer '" + std::string(tok) + "' (expected none, vt, ae1 or ae3)");
}

inline double population_variance(const Eigen::MatrixXd& x, Eigen::Index col) {
    const double n = static_cast<double>(x.rows());
    double mean = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) mean += x(i, col);
    mean /= n;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double d = x(i, col) - mean;
        acc += d * d;
    }
    return acc / n;
}

struct ReducerSpec {
    ReducerKind kind = ReducerKind::none;
    double threshold = 0.1;       // variance filter cut
    Eigen::Index bottleneck = 32; // autoencoder code width
    nn::TrainConfig train;        // autoencoder regimen (dropout stays 0)
};

// A fitted reducer. Variance filtering works on raw counts; the autoencoders
// carry their own input scaler and expose the bottleneck activations.
struct ReducerModel {
    ReducerKind kind = ReducerKind::none;
    Eigen::Index input_dim = 0;
    double threshold = 0.0;
    std::vector<Eigen::Index> kept; // variance filter columns, ascending
    nn::FeatureScaler scaler;
    nn::Network net;
    std::size_t encoder_depth = 0;

    Eigen::Index output_dim() const {
        switch (kind) {
            case ReducerKind::none: return input_dim;
            case ReducerKind::variance: return static_cast<Eigen::Index>(kept.size());
            case ReducerKind::ae1:
            case ReducerKind::ae3: return net.spec.layer_widths[encoder_depth];
        }
        throw ConfigError("unknown reducer kind");
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        if (x.cols() != input_dim)
            throw ShapeMismatch("ShapeMismatch: reducer fitted on " + std::to_string(input_dim) +
                                " columns, got " + std::to_string(x.cols()));
        switch (kind) {
            case ReducerKind::none: return x;
            case ReducerKind::variance: {
                Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(kept.size()));
                for (std::size_t j = 0; j < kept.size(); ++j)
                    out.col(static_cast<Eigen::Index>(j)) = x.col(kept[j]);
                return out;
            }
            case ReducerKind::ae1:
            case ReducerKind::ae3: {
                const auto acts = net.forward_all(scaler.transform(x));
                return acts[encoder_depth];
            }
        }
        throw ConfigError("unknown reducer kind");
    }

    void save(BinaryWriter& out) const {
        out.magic("OPCLASS-RD1");
        out.u8(static_cast<std::uint8_t>(kind));
        out.u64(static_cast<std::uint64_t>(input_dim));
        if (kind == ReducerKind::variance) {
            out.f64(threshold);
            out.u64(kept.size());
            for (const auto j : kept) out.u64(static_cast<std::uint64_t>(j));
        } else if (kind == ReducerKind::ae1 || kind == ReducerKind::ae3) {
            out.u64(encoder_depth);
            scaler.save(out);
            net.save(out);
        }
    }

    static ReducerModel load(BinaryReader& in) {
        in.expect_magic("OPCLASS-RD1");
        ReducerModel m;
        const auto kind = in.u8();
        if (kind > 3) throw FormatViolation("unknown reducer id " + std::to_string(kind));
        m.kind = static_cast<ReducerKind>(kind);
        m.input_dim = static_cast<Eigen::Index>(in.u64());
        if (m.kind == ReducerKind::variance) {
            m.threshold = in.f64();
            const std::uint64_t n = in.u64();
            for (std::uint64_t i = 0; i < n; ++i) {
                const auto j = static_cast<Eigen::Index>(in.u64());
                if (j >= m.input_dim) throw FormatViolation("kept column out of range");
                m.kept.push_back(j);
            }
        } else if (m.kind == ReducerKind::ae1 || m.kind == ReducerKind::ae3) {
            m.encoder_depth = in.u64();
            m.scaler = nn::FeatureScaler::load(in);
            m.net = nn::Network::load(in);
            if (m.encoder_depth == 0 || m.encoder_depth >= m.net.depth())
                throw FormatViolation("encoder depth out of range");
        }
        return m;
    }
};

namespace detail {

inline nn::NetworkSpec autoencoder_spec(ReducerKind kind, Eigen::Index input_dim,
                                        Eigen::Index bottleneck) {
    nn::NetworkSpec spec;
    if (kind == ReducerKind::ae1) {
        spec.layer_widths = {input_dim, bottleneck, input_dim};
    } else {
        spec.layer_widths = {input_dim, 128, 64, bottleneck, 64, 128, input_dim};
    }
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l)
        spec.activations.push_back(l + 2 == spec.layer_widths.size() ? nn::Activation::linear
                                                                     : nn::Activation::elu);
    spec.dropout_rate = 0.0;
    spec.loss = nn::Loss::mse;
    return spec;
}

} // namespace detail

// Fit on training rows only. The autoencoders learn to reconstruct the scaled
// features under MSE and keep only their encoder half active afterwards.
inline ReducerModel fit_reducer(const Eigen::MatrixXd& train, const ReducerSpec& spec,
                                std::uint64_t seed, nn::TrainingTrace* trace = nullptr) {
    if (train.rows() == 0) throw TooFewRows("TooFewRows: reducer needs at least one row");
    ReducerModel m;
    m.kind = spec.kind;
    m.input_dim = train.cols();
    switch (spec.kind) {
        case ReducerKind::none: return m;
        case ReducerKind::variance: {
            m.threshold = spec.threshold;
            for (Eigen::Index j = 0; j < train.cols(); ++j)
                if (population_variance(train, j) >= spec.threshold) m.kept.push_back(j);
            if (m.kept.empty()) throw EmptyFeatureSet();
            return m;
        }
        case ReducerKind::ae1:
        case ReducerKind::ae3: {
            if (spec.bottleneck < 1) throw ConfigError("reducer: bottleneck must be >= 1");
            m.scaler.fit(train);
            const Eigen::MatrixXd scaled = m.scaler.transform(train);
            const auto net_spec = detail::autoencoder_spec(spec.kind, train.cols(), spec.bottleneck);
            SplitRng init_rng(derive_seed(seed, "init"));
            m.net = nn::Network::glorot(net_spec, init_rng);
            nn::TrainConfig tc = spec.train;
            tc.seed = derive_seed(seed, "train");
            const auto tr = nn::train(m.net, scaled, scaled, tc);
            if (trace) *trace = tr;
            m.encoder_depth = net_spec.depth() / 2;
            return m;
        }
    }
    throw ConfigError("unknown reducer kind");
}

} // namespace opclass
