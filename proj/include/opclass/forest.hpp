#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "opclass/errors.hpp"
#include "opclass/io.hpp"
#include "opclass/rng.hpp"

namespace opclass {

struct RandomForestConfig {
    int n_trees = 100;
    int max_depth = 0;        // 0: unlimited
    int min_samples_split = 2;
    int features_per_split = 0; // 0: ceil(sqrt(p))
    bool bootstrap = true;      // false trains every tree on the full sample
    std::uint64_t seed = 0;
};

struct TreeNode {
    Eigen::Index feature = -1; // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double proba = 0.0; // P(label 1) among the node's training rows
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    double predict_proba_row(const Eigen::MatrixXd& x, Eigen::Index row) const {
        int at = 0;
        while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(at)];
            at = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(at)].proba;
    }
};

namespace detail {

struct SplitChoice {
    bool found = false;
    Eigen::Index feature = -1;
    double threshold = 0.0;
    double gain = -1.0;
};

inline double gini(double n0, double n1) {
    const double n = n0 + n1;
    if (n == 0.0) return 0.0;
    const double p0 = n0 / n, p1 = n1 / n;
    return 1.0 - p0 * p0 - p1 * p1;
}

// Best (gain, feature, threshold) over the given features for the rows in
// `idx`. Candidates are midpoints between consecutive distinct values; a
// strict > comparison over an ascending scan breaks ties toward the lower
// feature and lower threshold. Any valid split beats no split, so impure
// nodes keep splitting even at zero gain.
inline SplitChoice best_split(const Eigen::MatrixXd& x, const std::vector<int>& y,
                              const std::vector<std::size_t>& idx,
                              const std::vector<Eigen::Index>& features,
                              std::vector<std::pair<double, int>>& scratch) {
    SplitChoice best;
    const double n = static_cast<double>(idx.size());
    double n1 = 0.0;
    for (const auto i : idx) n1 += y[i];
    const double parent = gini(n - n1, n1);

    for (const Eigen::Index f : features) {
        scratch.clear();
        for (const auto i : idx) scratch.emplace_back(x(static_cast<Eigen::Index>(i), f), y[i]);
        std::sort(scratch.begin(), scratch.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double left0 = 0.0, left1 = 0.0;
        for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
            if (scratch[i].second == 1)
                left1 += 1.0;
            else
                left0 += 1.0;
            const double a = scratch[i].first, b = scratch[i + 1].first;
            if (a == b) continue;
            double thr = std::midpoint(a, b);
            if (thr >= b) thr = a; // keep the boundary between a and b after rounding
            const double nl = left0 + left1, nr = n - nl;
            const double gain =
                parent - (nl / n) * gini(left0, left1) - (nr / n) * gini(n - n1 - left0, n1 - left1);
            if (gain > best.gain) {
                best.found = true;
                best.feature = f;
                best.threshold = thr;
                best.gain = gain;
            }
        }
    }
    return best;
}

} // namespace detail

class RandomForest {
public:
    std::vector<DecisionTree> trees;
    Eigen::Index n_features = 0;

    double tree_proba(std::size_t t, const Eigen::MatrixXd& x, Eigen::Index row) const {
        return trees[t].predict_proba_row(x, row);
    }

    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const {
        if (x.cols() != n_features)
            throw ShapeMismatch("ShapeMismatch: forest trained on " + std::to_string(n_features) +
                                " features, got " + std::to_string(x.cols()));
        Eigen::VectorXd p = Eigen::VectorXd::Zero(x.rows());
        for (const auto& tree : trees)
            for (Eigen::Index i = 0; i < x.rows(); ++i) p(i) += tree.predict_proba_row(x, i);
        return p / static_cast<double>(trees.size());
    }

    std::vector<int> predict(const Eigen::MatrixXd& x) const {
        const Eigen::VectorXd p = predict_proba(x);
        std::vector<int> out(static_cast<std::size_t>(p.size()));
        for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p(i) >= 0.5 ? 1 : 0;
        return out;
    }

    void save(BinaryWriter& out) const {
        out.u64(static_cast<std::uint64_t>(n_features));
        out.u64(trees.size());
        for (const auto& tree : trees) {
            out.u64(tree.nodes.size());
            for (const auto& nd : tree.nodes) {
                out.u64(static_cast<std::uint64_t>(nd.feature + 1));
                out.f64(nd.threshold);
                out.u64(static_cast<std::uint64_t>(nd.left + 1));
                out.u64(static_cast<std::uint64_t>(nd.right + 1));
                out.f64(nd.proba);
            }
        }
    }

    static RandomForest load(BinaryReader& in) {
        RandomForest rf;
        rf.n_features = static_cast<Eigen::Index>(in.u64());
        const std::uint64_t nt = in.u64();
        rf.trees.resize(nt);
        for (auto& tree : rf.trees) {
            const std::uint64_t nn = in.u64();
            tree.nodes.resize(nn);
            for (auto& nd : tree.nodes) {
                nd.feature = static_cast<Eigen::Index>(in.u64()) - 1;
                nd.threshold = in.f64();
                nd.left = static_cast<int>(in.u64()) - 1;
                nd.right = static_cast<int>(in.u64()) - 1;
                nd.proba = in.f64();
                if (nd.feature >= rf.n_features)
                    throw FormatViolation("tree node references a feature out of range");
                if (nd.feature >= 0 && (nd.left < 0 || nd.right < 0 ||
                                        static_cast<std::uint64_t>(nd.left) >= nn ||
                                        static_cast<std::uint64_t>(nd.right) >= nn))
                    throw FormatViolation("tree node child out of range");
            }
        }
        return rf;
    }
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const std::vector<int>& y, const RandomForestConfig& cfg,
                SplitRng& rng)
        : x_(x), y_(y), cfg_(cfg), rng_(rng) {
        all_features_.resize(static_cast<std::size_t>(x.cols()));
        std::iota(all_features_.begin(), all_features_.end(), Eigen::Index{0});
        const auto p = static_cast<std::size_t>(x.cols());
        k_ = cfg.features_per_split > 0
                 ? std::min<std::size_t>(static_cast<std::size_t>(cfg.features_per_split), p)
                 : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
    }

    DecisionTree build(std::vector<std::size_t> idx) {
        tree_.nodes.clear();
        grow(std::move(idx), 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<std::size_t> idx, int depth) {
        const int node_id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double n1 = 0.0;
        for (const auto i : idx) n1 += y_[i];
        tree_.nodes[static_cast<std::size_t>(node_id)].proba = n1 / static_cast<double>(idx.size());

        const bool pure = n1 == 0.0 || n1 == static_cast<double>(idx.size());
        const bool too_small = idx.size() < static_cast<std::size_t>(cfg_.min_samples_split);
        const bool too_deep = cfg_.max_depth > 0 && depth >= cfg_.max_depth;
        if (pure || too_small || too_deep) return node_id;

        auto choice = best_split(x_, y_, idx, sample_features(), scratch_);
        if (!choice.found) choice = best_split(x_, y_, idx, all_features_, scratch_);
        if (!choice.found) return node_id;

        std::vector<std::size_t> left, right;
        for (const auto i : idx) {
            if (x_(static_cast<Eigen::Index>(i), choice.feature) <= choice.threshold)
                left.push_back(i);
            else
                right.push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        auto& node = tree_.nodes[static_cast<std::size_t>(node_id)];
        node.feature = choice.feature;
        node.threshold = choice.threshold;
        const int l = grow(std::move(left), depth + 1);
        tree_.nodes[static_cast<std::size_t>(node_id)].left = l;
        const int r = grow(std::move(right), depth + 1);
        tree_.nodes[static_cast<std::size_t>(node_id)].right = r;
        return node_id;
    }

    std::vector<Eigen::Index> sample_features() {
        const std::size_t p = all_features_.size();
        if (k_ >= p) return all_features_;
        std::vector<Eigen::Index> pool = all_features_;
        for (std::size_t i = 0; i < k_; ++i)
            std::swap(pool[i], pool[i + rng_.below(p - i)]);
        pool.resize(k_);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    const Eigen::MatrixXd& x_;
    const std::vector<int>& y_;
    const RandomForestConfig& cfg_;
    SplitRng& rng_;
    std::vector<Eigen::Index> all_features_;
    std::size_t k_ = 0;
    DecisionTree tree_;
    std::vector<std::pair<double, int>> scratch_;
};

} // namespace detail

// Bagged Gini trees. Each tree gets its own derived RNG stream, drawing the
// bootstrap sample first and then one feature subset per node in preorder,
// so tree t is reproducible regardless of how many trees run.
inline RandomForest train_forest(const Eigen::MatrixXd& x, const std::vector<int>& y,
                                 const RandomForestConfig& cfg) {
    if (x.rows() == 0) throw TooFewRows("TooFewRows: forest needs at least one row");
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw ShapeMismatch("ShapeMismatch: labels do not match matrix rows");
    if (cfg.n_trees < 1) throw ConfigError("forest: n_trees must be >= 1");
    if (cfg.min_samples_split < 2) throw ConfigError("forest: min_samples_split must be >= 2");
    bool saw[2] = {false, false};
    for (const int label : y) {
        if (label != 0 && label != 1) throw FormatViolation("labels must be 0 or 1");
        saw[label] = true;
    }
    if (!saw[0] || !saw[1]) throw SingleClass();

    RandomForest rf;
    rf.n_features = x.cols();
    rf.trees.reserve(static_cast<std::size_t>(cfg.n_trees));
    const std::size_t n = static_cast<std::size_t>(x.rows());
    for (int t = 0; t < cfg.n_trees; ++t) {
        SplitRng rng(derive_seed(cfg.seed, "tree", t));
        std::vector<std::size_t> idx(n);
        if (cfg.bootstrap) {
            for (std::size_t i = 0; i < n; ++i) idx[i] = rng.below(n);
        } else {
            std::iota(idx.begin(), idx.end(), std::size_t{0});
        }
        detail::TreeBuilder builder(x, y, cfg, rng);
        rf.trees.push_back(builder.build(std::move(idx)));
    }
    return rf;
}

} // namespace opclass
