#pragma once

// Slow, obviously-correct re-implementations used to cross-check the library.
// Everything here is written against the maths directly, not the library code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "opclass/neural.hpp"

namespace oracle {

// Exhaustive k-NN: score every candidate, full sort on (distance, row index).
inline std::vector<Eigen::Index> brute_knn(const Eigen::MatrixXd& m, Eigen::Index query,
                                           const std::vector<Eigen::Index>& candidates, int k) {
    std::vector<std::pair<double, Eigen::Index>> scored;
    for (const auto c : candidates) {
        if (c == query) continue;
        double d = 0.0;
        for (Eigen::Index j = m.cols(); j-- > 0;) {
            const double diff = m(query, j) - m(c, j);
            d += diff * diff;
        }
        scored.emplace_back(d, c);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second < b.second;
    });
    std::vector<Eigen::Index> out;
    for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i)
        out.push_back(scored[static_cast<std::size_t>(i)].second);
    return out;
}

// Population variance per column via E[x^2] - mean^2; returns the kept set.
inline std::vector<Eigen::Index> variance_keep(const Eigen::MatrixXd& x, double threshold) {
    std::vector<Eigen::Index> kept;
    const double n = static_cast<double>(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double s = 0.0, s2 = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            s += x(i, j);
            s2 += x(i, j) * x(i, j);
        }
        const double mean = s / n;
        if (s2 / n - mean * mean >= threshold) kept.push_back(j);
    }
    return kept;
}

inline double scalar_activate(opclass::nn::Activation a, double z) {
    switch (a) {
        case opclass::nn::Activation::linear: return z;
        case opclass::nn::Activation::elu: return z > 0.0 ? z : std::expm1(z);
        case opclass::nn::Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

// Row-at-a-time forward pass with plain scalar loops; no mask support.
inline Eigen::MatrixXd forward(const opclass::nn::Network& net, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), net.spec.output_dim());
    for (Eigen::Index row = 0; row < x.rows(); ++row) {
        std::vector<double> a(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index j = 0; j < x.cols(); ++j) a[static_cast<std::size_t>(j)] = x(row, j);
        for (std::size_t l = 0; l < net.depth(); ++l) {
            const auto& w = net.w[l];
            std::vector<double> next(static_cast<std::size_t>(w.rows()));
            for (Eigen::Index o = 0; o < w.rows(); ++o) {
                double z = net.b[l](o);
                for (Eigen::Index i = 0; i < w.cols(); ++i)
                    z += w(o, i) * a[static_cast<std::size_t>(i)];
                next[static_cast<std::size_t>(o)] = scalar_activate(net.spec.activations[l], z);
            }
            a = std::move(next);
        }
        for (std::size_t o = 0; o < a.size(); ++o) out(row, static_cast<Eigen::Index>(o)) = a[o];
    }
    return out;
}

// Two class means; predicts whichever centroid is closer (ties go to 0).
struct NearestCentroid {
    Eigen::RowVectorXd mu0, mu1;

    void fit(const Eigen::MatrixXd& x, const std::vector<int>& y) {
        mu0 = Eigen::RowVectorXd::Zero(x.cols());
        mu1 = Eigen::RowVectorXd::Zero(x.cols());
        double n0 = 0.0, n1 = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (y[static_cast<std::size_t>(i)] == 1) {
                mu1 += x.row(i);
                n1 += 1.0;
            } else {
                mu0 += x.row(i);
                n0 += 1.0;
            }
        }
        mu0 /= n0;
        mu1 /= n1;
    }

    std::vector<int> predict(const Eigen::MatrixXd& x) const {
        std::vector<int> out(static_cast<std::size_t>(x.rows()));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double d0 = (x.row(i) - mu0).squaredNorm();
            const double d1 = (x.row(i) - mu1).squaredNorm();
            out[static_cast<std::size_t>(i)] = d1 < d0 ? 1 : 0;
        }
        return out;
    }
};

} // namespace oracle
