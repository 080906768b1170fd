#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opclass/dataset.hpp"
#include "opclass/errors.hpp"
#include "opclass/rng.hpp"

namespace opclass {

struct AdasynConfig {
    int k = 5;
    double beta = 1.0;
    std::uint64_t seed = 0;
};

struct AdasynPointAudit {
    std::string row_id;
    double r = 0.0;     // majority share of the k-NN
    double r_hat = 0.0; // normalized
    long g = 0;         // synthetics assigned
};

struct SyntheticRecord {
    std::string synthetic_id;
    std::string parent_a; // the seeding minority point
    std::string parent_b; // the k-NN minority neighbor mixed in
    double lambda = 0.0;
};

struct AdasynAudit {
    std::size_t minority_count = 0;
    std::size_t majority_count = 0;
    int minority_label = 0;
    long g_total = 0;
    long generated = 0;
    std::vector<AdasynPointAudit> points;
    std::vector<SyntheticRecord> synthetics;
};

inline double squared_distance(const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double d = m(a, j) - m(b, j);
        s += d * d;
    }
    return s;
}

// k nearest candidates to `query` by squared Euclidean distance, ties broken
// toward the lower row index. The query itself may appear in `candidates`
// and is skipped.
inline std::vector<Eigen::Index> knn_indices(const Eigen::MatrixXd& m, Eigen::Index query,
                                             const std::vector<Eigen::Index>& candidates, int k) {
    if (k < 1) throw ConfigError("knn: k must be >= 1");
    std::vector<std::pair<double, Eigen::Index>> scored;
    scored.reserve(candidates.size());
    for (const auto c : candidates) {
        if (c == query) continue;
        scored.emplace_back(squared_distance(m, query, c), c);
    }
    if (scored.size() < static_cast<std::size_t>(k))
        throw InsufficientRows("InsufficientRows: need " + std::to_string(k) +
                               " neighbours, have " + std::to_string(scored.size()));
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end());
    std::vector<Eigen::Index> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(scored[static_cast<std::size_t>(i)].second);
    return out;
}

// ADASYN oversampling. Density ratios come from each minority point's k-NN
// over the FULL dataset; each synthetic interpolates toward a uniformly
// chosen minority member of that same neighbourhood (or duplicates the point
// when the neighbourhood holds none). k is clamped to the available rows.
inline LabeledDataset adasyn(const LabeledDataset& ds, const AdasynConfig& cfg,
                             AdasynAudit* audit = nullptr) {
    if (cfg.k < 1) throw ConfigError("adasyn: k must be >= 1");
    if (cfg.beta < 0.0 || cfg.beta > 1.0) throw ConfigError("adasyn: beta must be in [0, 1]");
    const std::size_t n = ds.labels.size();
    if (n < 2) throw InsufficientRows("InsufficientRows: ADASYN needs at least two rows");

    std::size_t count1 = 0;
    for (const int label : ds.labels) count1 += label == 1 ? 1u : 0u;
    const std::size_t count0 = n - count1;
    if (count0 == 0 || count1 == 0) throw SingleClass();

    const int minority_label = count0 <= count1 ? 0 : 1;
    const std::size_t m_small = std::min(count0, count1);
    const std::size_t m_large = std::max(count0, count1);

    if (audit) {
        *audit = AdasynAudit{};
        audit->minority_count = m_small;
        audit->majority_count = m_large;
        audit->minority_label = minority_label;
    }
    if (m_small == m_large) return ds;

    std::vector<Eigen::Index> minority, all;
    all.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        all.push_back(static_cast<Eigen::Index>(i));
        if (ds.labels[i] == minority_label) minority.push_back(static_cast<Eigen::Index>(i));
    }

    const int k = std::min<int>(cfg.k, static_cast<int>(n) - 1);
    const double g_target = static_cast<double>(m_large - m_small) * cfg.beta;

    struct Point {
        Eigen::Index row;
        std::vector<Eigen::Index> minority_neighbours;
        double r = 0.0, r_hat = 0.0;
        long g = 0;
    };
    std::vector<Point> points;
    points.reserve(minority.size());
    double r_sum = 0.0;
    for (const auto row : minority) {
        Point p;
        p.row = row;
        const auto neigh = knn_indices(ds.matrix, row, all, k);
        int majority_hits = 0;
        for (const auto idx : neigh) {
            if (ds.labels[static_cast<std::size_t>(idx)] == minority_label)
                p.minority_neighbours.push_back(idx);
            else
                ++majority_hits;
        }
        p.r = static_cast<double>(majority_hits) / static_cast<double>(k);
        r_sum += p.r;
        points.push_back(std::move(p));
    }

    long g_total = 0;
    for (auto& p : points) {
        p.r_hat = r_sum > 0.0 ? p.r / r_sum : 1.0 / static_cast<double>(points.size());
        p.g = static_cast<long>(std::floor(p.r_hat * g_target + 0.5)); // round half up
        g_total += p.g;
    }

    LabeledDataset out = ds;
    out.matrix.conservativeResize(static_cast<Eigen::Index>(n) + g_total, ds.matrix.cols());
    Eigen::Index write = static_cast<Eigen::Index>(n);
    SplitRng rng(cfg.seed);
    long generated = 0;

    for (const auto& p : points) {
        const std::string& parent_id = ds.row_ids[static_cast<std::size_t>(p.row)];
        for (long j = 1; j <= p.g; ++j) {
            const double lambda = rng.uniform01();
            Eigen::Index partner = p.row;
            if (!p.minority_neighbours.empty()) {
                const std::size_t pick = rng.below(p.minority_neighbours.size());
                partner = p.minority_neighbours[pick];
            }
            out.matrix.row(write) =
                ds.matrix.row(p.row) + lambda * (ds.matrix.row(partner) - ds.matrix.row(p.row));
            const std::string synth_id = parent_id + "~syn" + std::to_string(j);
            out.row_ids.push_back(synth_id);
            out.labels.push_back(minority_label);
            if (audit)
                audit->synthetics.push_back(
                    {synth_id, parent_id, ds.row_ids[static_cast<std::size_t>(partner)], lambda});
            ++write;
            ++generated;
        }
    }

    if (audit) {
        audit->g_total = g_total;
        audit->generated = generated;
        for (const auto& p : points)
            audit->points.push_back(
                {ds.row_ids[static_cast<std::size_t>(p.row)], p.r, p.r_hat, p.g});
    }
    return out;
}

} // namespace opclass
