#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "opclass/errors.hpp"
#include "opclass/io.hpp"
#include "opclass/rng.hpp"

namespace opclass::nn {

enum class Activation : std::uint8_t { linear = 0, elu = 1, sigmoid = 2 };
enum class Loss : std::uint8_t { mse = 0, bce = 1 };

constexpr double kBceClamp = 1e-7;

// Dense net shape: widths include input and output, one activation per
// weight layer. Dropout applies to hidden activations only, during training.
struct NetworkSpec {
    std::vector<Eigen::Index> layer_widths;
    std::vector<Activation> activations;
    double dropout_rate = 0.0;
    Loss loss = Loss::mse;

    std::size_t depth() const { return activations.size(); }
    Eigen::Index input_dim() const { return layer_widths.front(); }
    Eigen::Index output_dim() const { return layer_widths.back(); }

    void validate() const {
        if (layer_widths.size() < 2) throw ConfigError("network: need input and output widths");
        if (activations.size() + 1 != layer_widths.size())
            throw ConfigError("network: need exactly one activation per weight layer");
        for (const auto w : layer_widths)
            if (w < 1) throw ConfigError("network: layer width must be >= 1");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw ConfigError("network: dropout must be in [0, 1)");
    }
};

struct TrainConfig {
    int batch_size = 64;
    int epochs = 120;
    double alpha = 1e-3; // Adam
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double validation_fraction = 0.1; // tail of the shuffled rows; 0 validates on the train split
    std::uint64_t seed = 0;
};

struct TrainingTrace {
    std::vector<double> train_loss; // evaluated after each epoch, dropout off
    std::vector<double> val_loss;
};

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::linear: return z;
        case Activation::elu: return z > 0.0 ? z : std::expm1(z);
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    throw NumericError("unknown activation");
}

// Derivative through the activation value itself; for ELU the value fixes the
// branch (a > 0 iff z > 0, and a + 1 = exp(z) below zero).
inline double activate_grad(Activation a, double value) {
    switch (a) {
        case Activation::linear: return 1.0;
        case Activation::elu: return value > 0.0 ? 1.0 : value + 1.0;
        case Activation::sigmoid: return value * (1.0 - value);
    }
    throw NumericError("unknown activation");
}

inline double loss_value(Loss loss, const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw ShapeMismatch("ShapeMismatch: prediction and target shapes differ");
    const double n = static_cast<double>(pred.size());
    if (loss == Loss::mse) return (pred - target).squaredNorm() / n;
    double s = 0.0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
        for (Eigen::Index j = 0; j < pred.cols(); ++j) {
            const double c = std::clamp(pred(i, j), kBceClamp, 1.0 - kBceClamp);
            const double y = target(i, j);
            s -= y * std::log(c) + (1.0 - y) * std::log(1.0 - c);
        }
    return s / n;
}

// Gradient of the mean loss with respect to the raw prediction. Entries that
// hit the cross-entropy clamp contribute zero, matching the flat loss there.
inline Eigen::MatrixXd loss_gradient(Loss loss, const Eigen::MatrixXd& pred,
                                     const Eigen::MatrixXd& target) {
    const double n = static_cast<double>(pred.size());
    if (loss == Loss::mse) return (2.0 / n) * (pred - target);
    Eigen::MatrixXd g(pred.rows(), pred.cols());
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
        for (Eigen::Index j = 0; j < pred.cols(); ++j) {
            const double p = pred(i, j);
            if (p < kBceClamp || p > 1.0 - kBceClamp) {
                g(i, j) = 0.0;
                continue;
            }
            g(i, j) = (p - target(i, j)) / (p * (1.0 - p)) / n;
        }
    return g;
}

struct Gradients {
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;
};

class Network {
public:
    NetworkSpec spec;
    std::vector<Eigen::MatrixXd> w; // layer l: widths[l+1] x widths[l]
    std::vector<Eigen::VectorXd> b;

    static Network glorot(const NetworkSpec& spec, SplitRng& rng) {
        spec.validate();
        Network net;
        net.spec = spec;
        for (std::size_t l = 0; l < spec.depth(); ++l) {
            const Eigen::Index fan_in = spec.layer_widths[l];
            const Eigen::Index fan_out = spec.layer_widths[l + 1];
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            Eigen::MatrixXd wl(fan_out, fan_in);
            for (Eigen::Index i = 0; i < wl.rows(); ++i)
                for (Eigen::Index j = 0; j < wl.cols(); ++j) wl(i, j) = rng.uniform(-limit, limit);
            net.w.push_back(std::move(wl));
            net.b.push_back(Eigen::VectorXd::Zero(fan_out));
        }
        return net;
    }

    std::size_t depth() const { return spec.depth(); }

    // Activations per layer for a row-per-sample input; out[0] is the input
    // itself. Hidden activations are scaled by `masks` when provided
    // (inverted dropout, applied after the nonlinearity).
    std::vector<Eigen::MatrixXd> forward_all(const Eigen::MatrixXd& x,
                                             const std::vector<Eigen::MatrixXd>* masks = nullptr) const {
        if (x.cols() != spec.input_dim())
            throw ShapeMismatch("ShapeMismatch: input has " + std::to_string(x.cols()) +
                                " columns, network expects " + std::to_string(spec.input_dim()));
        std::vector<Eigen::MatrixXd> acts;
        acts.reserve(depth() + 1);
        acts.push_back(x);
        for (std::size_t l = 0; l < depth(); ++l) {
            Eigen::MatrixXd z = acts.back() * w[l].transpose();
            z.rowwise() += b[l].transpose();
            const Activation act = spec.activations[l];
            for (Eigen::Index i = 0; i < z.rows(); ++i)
                for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = activate(act, z(i, j));
            if (masks && l + 1 < depth()) z.array() *= (*masks)[l].array();
            acts.push_back(std::move(z));
        }
        return acts;
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const { return forward_all(x).back(); }

    // Backpropagation through the cached activations; `masks` must be the
    // same masks the forward pass used.
    Gradients backward(const std::vector<Eigen::MatrixXd>& acts, const Eigen::MatrixXd& target,
                       const std::vector<Eigen::MatrixXd>* masks = nullptr) const {
        Gradients g;
        g.dw.resize(depth());
        g.db.resize(depth());
        Eigen::MatrixXd da = loss_gradient(spec.loss, acts.back(), target);
        for (std::size_t l = depth(); l-- > 0;) {
            const Activation act = spec.activations[l];
            // acts[l+1] carries the dropout scaling; recover the raw value
            // where the mask is live, zero gradient where the unit dropped.
            Eigen::MatrixXd dz(da.rows(), da.cols());
            if (masks && l + 1 < depth()) {
                const auto& mask = (*masks)[l];
                for (Eigen::Index i = 0; i < dz.rows(); ++i)
                    for (Eigen::Index j = 0; j < dz.cols(); ++j) {
                        const double m = mask(i, j);
                        if (m == 0.0) {
                            dz(i, j) = 0.0;
                            continue;
                        }
                        const double raw = acts[l + 1](i, j) / m;
                        dz(i, j) = da(i, j) * m * activate_grad(act, raw);
                    }
            } else {
                for (Eigen::Index i = 0; i < dz.rows(); ++i)
                    for (Eigen::Index j = 0; j < dz.cols(); ++j)
                        dz(i, j) = da(i, j) * activate_grad(act, acts[l + 1](i, j));
            }
            g.dw[l] = dz.transpose() * acts[l];
            g.db[l] = dz.colwise().sum().transpose();
            if (l > 0) da = dz * w[l];
        }
        return g;
    }

    void save(BinaryWriter& out) const {
        out.magic("OPCLASS-NN1");
        out.u64(spec.layer_widths.size());
        for (const auto width : spec.layer_widths) out.u64(static_cast<std::uint64_t>(width));
        for (const auto act : spec.activations) out.u8(static_cast<std::uint8_t>(act));
        out.f64(spec.dropout_rate);
        out.u8(static_cast<std::uint8_t>(spec.loss));
        for (std::size_t l = 0; l < depth(); ++l) {
            out.matrix(w[l]);
            out.matrix(b[l]);
        }
    }

    static Network load(BinaryReader& in) {
        in.expect_magic("OPCLASS-NN1");
        Network net;
        const std::uint64_t n_widths = in.u64();
        if (n_widths < 2 || n_widths > 1u << 16)
            throw FormatViolation("implausible layer count " + std::to_string(n_widths));
        for (std::uint64_t i = 0; i < n_widths; ++i)
            net.spec.layer_widths.push_back(static_cast<Eigen::Index>(in.u64()));
        for (std::uint64_t i = 0; i + 1 < n_widths; ++i) {
            const auto act = in.u8();
            if (act > 2) throw FormatViolation("unknown activation id " + std::to_string(act));
            net.spec.activations.push_back(static_cast<Activation>(act));
        }
        net.spec.dropout_rate = in.f64();
        const auto loss = in.u8();
        if (loss > 1) throw FormatViolation("unknown loss id " + std::to_string(loss));
        net.spec.loss = static_cast<Loss>(loss);
        net.spec.validate();
        for (std::size_t l = 0; l < net.spec.depth(); ++l) {
            net.w.push_back(in.matrix());
            Eigen::MatrixXd bias = in.matrix();
            if (bias.cols() != 1) throw FormatViolation("bias must be a column vector");
            net.b.emplace_back(bias.col(0));
            if (net.w[l].rows() != net.spec.layer_widths[l + 1] ||
                net.w[l].cols() != net.spec.layer_widths[l] ||
                net.b[l].size() != net.spec.layer_widths[l + 1])
                throw FormatViolation("weight shape does not match layer spec");
        }
        return net;
    }
};

class AdamState {
public:
    explicit AdamState(const Network& net) {
        for (std::size_t l = 0; l < net.depth(); ++l) {
            mw_.push_back(Eigen::MatrixXd::Zero(net.w[l].rows(), net.w[l].cols()));
            vw_.push_back(Eigen::MatrixXd::Zero(net.w[l].rows(), net.w[l].cols()));
            mb_.push_back(Eigen::VectorXd::Zero(net.b[l].size()));
            vb_.push_back(Eigen::VectorXd::Zero(net.b[l].size()));
        }
    }

    void step(Network& net, const Gradients& g, const TrainConfig& cfg) {
        if (g.dw.size() != mw_.size())
            throw ShapeMismatch("ShapeMismatch: gradient layer count differs from the state");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
        for (std::size_t l = 0; l < mw_.size(); ++l) {
            if (g.dw[l].rows() != mw_[l].rows() || g.dw[l].cols() != mw_[l].cols() ||
                g.db[l].size() != mb_[l].size())
                throw ShapeMismatch("ShapeMismatch: gradient shape differs from the parameters");
            mw_[l] = cfg.beta1 * mw_[l] + (1.0 - cfg.beta1) * g.dw[l];
            vw_[l] = cfg.beta2 * vw_[l] + (1.0 - cfg.beta2) * g.dw[l].cwiseProduct(g.dw[l]);
            net.w[l].array() -= cfg.alpha * (mw_[l].array() / bc1) /
                                ((vw_[l].array() / bc2).sqrt() + cfg.epsilon);
            mb_[l] = cfg.beta1 * mb_[l] + (1.0 - cfg.beta1) * g.db[l];
            vb_[l] = cfg.beta2 * vb_[l] + (1.0 - cfg.beta2) * g.db[l].cwiseProduct(g.db[l]);
            net.b[l].array() -= cfg.alpha * (mb_[l].array() / bc1) /
                                ((vb_[l].array() / bc2).sqrt() + cfg.epsilon);
        }
    }

    long steps() const { return t_; }

private:
    std::vector<Eigen::MatrixXd> mw_, vw_;
    std::vector<Eigen::VectorXd> mb_, vb_;
    long t_ = 0;
};

// Mini-batch Adam. Per epoch: shuffle the train split, walk contiguous
// batches (the last may be short), then record full-pass train/validation
// losses with dropout off. validation_fraction carves the tail of the
// one-time shuffle; at 0 the validation set IS the train split, so at
// dropout 0 the two curves agree exactly.
inline TrainingTrace train(Network& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                           const TrainConfig& cfg) {
    if (x.rows() != y.rows()) throw ShapeMismatch("ShapeMismatch: inputs and targets row counts differ");
    if (y.cols() != net.spec.output_dim())
        throw ShapeMismatch("ShapeMismatch: target width differs from the output layer");
    if (x.rows() == 0) throw TooFewRows("TooFewRows: cannot train on an empty dataset");
    if (cfg.epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (cfg.validation_fraction < 0.0 || cfg.validation_fraction >= 1.0)
        throw ConfigError("train: validation_fraction must be in [0, 1)");

    SplitRng rng(cfg.seed);
    const std::size_t n = static_cast<std::size_t>(x.rows());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::size_t n_val = 0;
    if (cfg.validation_fraction > 0.0) {
        rng.shuffle(order);
        n_val = static_cast<std::size_t>(static_cast<double>(n) * cfg.validation_fraction);
        n_val = std::min(n_val, n - 1);
    }
    const std::size_t n_train = n - n_val;

    auto gather = [&](std::size_t first, std::size_t count, const Eigen::MatrixXd& src) {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(count), src.cols());
        for (std::size_t i = 0; i < count; ++i)
            out.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(order[first + i]));
        return out;
    };
    const Eigen::MatrixXd train_x = gather(0, n_train, x);
    const Eigen::MatrixXd train_y = gather(0, n_train, y);
    const Eigen::MatrixXd val_x = n_val > 0 ? gather(n_train, n_val, x) : train_x;
    const Eigen::MatrixXd val_y = n_val > 0 ? gather(n_train, n_val, y) : train_y;

    std::vector<std::size_t> batch_order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) batch_order[i] = i;

    AdamState adam(net);
    TrainingTrace trace;
    trace.train_loss.reserve(static_cast<std::size_t>(cfg.epochs));
    trace.val_loss.reserve(static_cast<std::size_t>(cfg.epochs));
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const double dropout = net.spec.dropout_rate;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(batch_order);
        for (std::size_t start = 0; start < n_train; start += bs) {
            const std::size_t count = std::min(bs, n_train - start);
            Eigen::MatrixXd bx(static_cast<Eigen::Index>(count), train_x.cols());
            Eigen::MatrixXd by(static_cast<Eigen::Index>(count), train_y.cols());
            for (std::size_t i = 0; i < count; ++i) {
                bx.row(static_cast<Eigen::Index>(i)) =
                    train_x.row(static_cast<Eigen::Index>(batch_order[start + i]));
                by.row(static_cast<Eigen::Index>(i)) =
                    train_y.row(static_cast<Eigen::Index>(batch_order[start + i]));
            }
            std::vector<Eigen::MatrixXd> masks;
            std::vector<Eigen::MatrixXd>* masks_ptr = nullptr;
            if (dropout > 0.0 && net.depth() > 1) {
                const double keep = 1.0 - dropout;
                for (std::size_t l = 0; l + 1 < net.depth(); ++l) {
                    Eigen::MatrixXd m(static_cast<Eigen::Index>(count), net.spec.layer_widths[l + 1]);
                    for (Eigen::Index i = 0; i < m.rows(); ++i)
                        for (Eigen::Index j = 0; j < m.cols(); ++j)
                            m(i, j) = rng.uniform01() < dropout ? 0.0 : 1.0 / keep;
                    masks.push_back(std::move(m));
                }
                masks_ptr = &masks;
            }
            const auto acts = net.forward_all(bx, masks_ptr);
            const auto grads = net.backward(acts, by, masks_ptr);
            adam.step(net, grads, cfg);
        }
        const double tl = loss_value(net.spec.loss, net.forward(train_x), train_y);
        const double vl = loss_value(net.spec.loss, net.forward(val_x), val_y);
        if (!std::isfinite(tl) || !std::isfinite(vl)) throw NonFiniteLoss(epoch);
        trace.train_loss.push_back(tl);
        trace.val_loss.push_back(vl);
    }
    return trace;
}

// Largest central-difference discrepancy across every weight and bias,
// relative as |ga - gn| / max(|ga| + |gn|, 1e-8). Dropout plays no part.
inline double grad_check(Network& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                         double step = 1e-5) {
    const auto acts = net.forward_all(x);
    const Gradients analytic = net.backward(acts, y);
    double worst = 0.0;
    auto probe = [&](double& theta, double ga) {
        const double saved = theta;
        theta = saved + step;
        const double lp = loss_value(net.spec.loss, net.forward(x), y);
        theta = saved - step;
        const double lm = loss_value(net.spec.loss, net.forward(x), y);
        theta = saved;
        const double gn = (lp - lm) / (2.0 * step);
        const double rel = std::abs(ga - gn) / std::max(std::abs(ga) + std::abs(gn), 1e-8);
        worst = std::max(worst, rel);
    };
    for (std::size_t l = 0; l < net.depth(); ++l) {
        for (Eigen::Index i = 0; i < net.w[l].rows(); ++i)
            for (Eigen::Index j = 0; j < net.w[l].cols(); ++j)
                probe(net.w[l](i, j), analytic.dw[l](i, j));
        for (Eigen::Index i = 0; i < net.b[l].size(); ++i)
            probe(net.b[l](i), analytic.db[l](i));
    }
    return worst;
}

// log1p followed by per-column min-max scaling to [0, 1]; fitted on training
// rows only. Inputs are floored just above -1 so autoencoder codes (ELU range
// (-1, inf)) stay in the log domain. Constant columns map to 0.
class FeatureScaler {
public:
    Eigen::VectorXd lo, hi;

    static double squash(double v) { return std::log1p(std::max(v, -1.0 + 1e-12)); }

    void fit(const Eigen::MatrixXd& x) {
        if (x.rows() == 0) throw TooFewRows("TooFewRows: scaler needs at least one row");
        lo.resize(x.cols());
        hi.resize(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            double mn = squash(x(0, j)), mx = mn;
            for (Eigen::Index i = 1; i < x.rows(); ++i) {
                const double v = squash(x(i, j));
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            lo(j) = mn;
            hi(j) = mx;
        }
    }

    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
        if (x.cols() != lo.size())
            throw ShapeMismatch("ShapeMismatch: scaler fitted on " + std::to_string(lo.size()) +
                                " columns, got " + std::to_string(x.cols()));
        Eigen::MatrixXd out(x.rows(), x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double span = hi(j) - lo(j);
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                out(i, j) = span > 0.0 ? (squash(x(i, j)) - lo(j)) / span : 0.0;
        }
        return out;
    }

    void save(BinaryWriter& out) const {
        out.matrix(lo);
        out.matrix(hi);
    }

    static FeatureScaler load(BinaryReader& in) {
        FeatureScaler s;
        Eigen::MatrixXd lo = in.matrix(), hi = in.matrix();
        if (lo.cols() != 1 || hi.cols() != 1 || lo.rows() != hi.rows())
            throw FormatViolation("scaler bounds must be equal-length column vectors");
        s.lo = lo.col(0);
        s.hi = hi.col(0);
        return s;
    }
};

} // namespace opclass::nn
