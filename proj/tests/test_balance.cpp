#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "opclass/opclass.hpp"
#include "oracles.hpp"

namespace {

Eigen::MatrixXd column(std::initializer_list<double> values) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
    Eigen::Index i = 0;
    for (const double v : values) m(i++, 0) = v;
    return m;
}

opclass::LabeledDataset one_dim(std::initializer_list<double> values, std::vector<int> labels) {
    opclass::LabeledDataset ds;
    ds.matrix = column(values);
    ds.labels = std::move(labels);
    ds.column_names = {"op0"};
    for (Eigen::Index i = 0; i < ds.rows(); ++i) ds.row_ids.push_back("r" + std::to_string(i));
    return ds;
}

std::vector<Eigen::Index> iota_rows(Eigen::Index n) {
    std::vector<Eigen::Index> v(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

} // namespace

TEST_CASE("knn picks the closest rows and skips the query", "[knn]") {
    const auto m = column({0.0, 1.0, 3.0});
    REQUIRE(opclass::knn_indices(m, 0, iota_rows(3), 1) == std::vector<Eigen::Index>{1});
    REQUIRE(opclass::knn_indices(m, 0, iota_rows(3), 2) == std::vector<Eigen::Index>{1, 2});
    REQUIRE(opclass::knn_indices(m, 2, iota_rows(3), 1) == std::vector<Eigen::Index>{1});
}

TEST_CASE("knn breaks distance ties toward the lower row index", "[knn]") {
    const auto m = column({1.0, 1.0, 2.0});
    REQUIRE(opclass::knn_indices(m, 2, iota_rows(3), 2) == std::vector<Eigen::Index>{0, 1});
    const auto m2 = column({9.0, 3.0, 4.0, 3.0});
    // rows 1 and 3 tie at distance 1 from row 2
    REQUIRE(opclass::knn_indices(m2, 2, iota_rows(4), 1) == std::vector<Eigen::Index>{1});
}

TEST_CASE("knn validates k and candidate count", "[knn]") {
    const auto m = column({0.0, 1.0});
    REQUIRE_THROWS_AS(opclass::knn_indices(m, 0, iota_rows(2), 0), opclass::ConfigError);
    REQUIRE_THROWS_AS(opclass::knn_indices(m, 0, iota_rows(2), 2), opclass::InsufficientRows);
    REQUIRE_THROWS_AS(opclass::knn_indices(m, 0, {0}, 1), opclass::InsufficientRows);
}

TEST_CASE("knn agrees with the exhaustive oracle on random data", "[knn]") {
    opclass::SplitRng rng(808);
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::MatrixXd m(20, 4);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-3.0, 3.0);
        const auto candidates = iota_rows(20);
        const int k = 1 + static_cast<int>(rng.below(10));
        const auto query = static_cast<Eigen::Index>(rng.below(20));
        REQUIRE(opclass::knn_indices(m, query, candidates, k) ==
                oracle::brute_knn(m, query, candidates, k));
    }
}

// --- adasyn ------------------------------------------------------------------

TEST_CASE("adasyn hand fixture: two synthetics on the minority segment", "[adasyn]") {
    const auto ds = one_dim({0.0, 0.1, 1.0, 1.1, 1.2, 1.3}, {0, 0, 1, 1, 1, 1});
    opclass::AdasynConfig cfg;
    cfg.k = 2;
    cfg.beta = 1.0;
    cfg.seed = 4;
    opclass::AdasynAudit audit;
    const auto out = opclass::adasyn(ds, cfg, &audit);

    REQUIRE(audit.minority_label == 0);
    REQUIRE(audit.minority_count == 2);
    REQUIRE(audit.majority_count == 4);
    REQUIRE(audit.points.size() == 2);
    // each minority point sees one minority and one majority neighbour
    for (const auto& pt : audit.points) {
        REQUIRE(pt.r == 0.5);
        REQUIRE(pt.r_hat == 0.5);
        REQUIRE(pt.g == 1);
    }
    REQUIRE(audit.g_total == 2);
    REQUIRE(out.rows() == 8);
    REQUIRE(out.labels[6] == 0);
    REQUIRE(out.labels[7] == 0);
    for (Eigen::Index i = 6; i < 8; ++i) {
        REQUIRE(out.matrix(i, 0) >= 0.0);
        REQUIRE(out.matrix(i, 0) <= 0.1);
    }
    REQUIRE(out.row_ids[6] == "r0~syn1");
    REQUIRE(out.row_ids[7] == "r1~syn1");
}

TEST_CASE("adasyn leaves balanced data untouched", "[adasyn]") {
    const auto ds = one_dim({0.0, 1.0, 2.0, 3.0}, {0, 0, 1, 1});
    opclass::AdasynAudit audit;
    const auto out = opclass::adasyn(ds, {}, &audit);
    REQUIRE(out == ds);
    REQUIRE(audit.generated == 0);
    REQUIRE(audit.minority_count == 2);
    REQUIRE(audit.majority_count == 2);
}

TEST_CASE("adasyn falls back to uniform weights when every neighbourhood is pure", "[adasyn]") {
    // minority cluster far from the majority: r = 0 for all three points
    const auto ds = one_dim({0.0, 0.1, 0.2, 10.0, 11.0, 12.0, 13.0, 14.0},
                            {0, 0, 0, 1, 1, 1, 1, 1});
    opclass::AdasynConfig cfg;
    cfg.k = 2;
    opclass::AdasynAudit audit;
    const auto out = opclass::adasyn(ds, cfg, &audit);
    for (const auto& pt : audit.points) {
        REQUIRE(pt.r == 0.0);
        REQUIRE(pt.r_hat == Catch::Approx(1.0 / 3.0));
        REQUIRE(pt.g == 1); // round-half-up of 2/3
    }
    REQUIRE(audit.generated == 3);
    REQUIRE(out.rows() == 11);
}

TEST_CASE("adasyn duplicates a minority point with no minority neighbours", "[adasyn]") {
    const auto ds = one_dim({0.0, 5.0, 6.0, 7.0}, {0, 1, 1, 1});
    opclass::AdasynConfig cfg;
    cfg.k = 2;
    opclass::AdasynAudit audit;
    const auto out = opclass::adasyn(ds, cfg, &audit);
    REQUIRE(audit.generated == 2);
    for (const auto& rec : audit.synthetics) {
        REQUIRE(rec.parent_a == "r0");
        REQUIRE(rec.parent_b == "r0"); // self-duplicate
    }
    REQUIRE(out.matrix(4, 0) == 0.0);
    REQUIRE(out.matrix(5, 0) == 0.0);
}

TEST_CASE("adasyn synthetics are convex mixes and originals stay bit-identical", "[adasyn]") {
    opclass::SplitRng rng(2024);
    for (int rep = 0; rep < 20; ++rep) {
        opclass::LabeledDataset ds;
        const int n_min = 4 + static_cast<int>(rng.below(4));
        const int n_maj = 12 + static_cast<int>(rng.below(8));
        ds.matrix.resize(n_min + n_maj, 3);
        for (Eigen::Index i = 0; i < ds.matrix.rows(); ++i) {
            const bool minority = i < n_min;
            for (Eigen::Index j = 0; j < 3; ++j)
                ds.matrix(i, j) = rng.uniform(minority ? 0.0 : 4.0, minority ? 1.5 : 9.0);
            ds.labels.push_back(minority ? 0 : 1);
            ds.row_ids.push_back((minority ? "min" : "maj") + std::to_string(i));
        }
        ds.column_names = {"a", "b", "c"};

        opclass::AdasynConfig cfg;
        cfg.k = 3;
        cfg.seed = rng.next_u64();
        opclass::AdasynAudit audit;
        const auto out = opclass::adasyn(ds, cfg, &audit);

        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            REQUIRE(out.row_ids[std::size_t(i)] == ds.row_ids[std::size_t(i)]);
            for (Eigen::Index j = 0; j < 3; ++j) REQUIRE(out.matrix(i, j) == ds.matrix(i, j));
        }
        std::map<std::string, Eigen::Index> row_of;
        for (Eigen::Index i = 0; i < ds.rows(); ++i) row_of[ds.row_ids[std::size_t(i)]] = i;
        REQUIRE(audit.synthetics.size() == std::size_t(out.rows() - ds.rows()));
        for (std::size_t s = 0; s < audit.synthetics.size(); ++s) {
            const auto& rec = audit.synthetics[s];
            REQUIRE(rec.lambda >= 0.0);
            REQUIRE(rec.lambda < 1.0);
            const auto a = row_of.at(rec.parent_a);
            const auto b = row_of.at(rec.parent_b);
            const Eigen::RowVectorXd expect =
                ds.matrix.row(a) + rec.lambda * (ds.matrix.row(b) - ds.matrix.row(a));
            const Eigen::RowVectorXd got = out.matrix.row(ds.rows() + Eigen::Index(s));
            REQUIRE((got - expect).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("adasyn is seed-deterministic", "[adasyn]") {
    const auto ds = opclass::synth_corpus(10, 40, 6, 0.7, 3);
    opclass::AdasynConfig cfg;
    cfg.seed = 77;
    const auto a = opclass::adasyn(ds, cfg);
    const auto b = opclass::adasyn(ds, cfg);
    REQUIRE(a == b);
    cfg.seed = 78;
    const auto c = opclass::adasyn(ds, cfg);
    REQUIRE_FALSE(c == a);
}

TEST_CASE("adasyn clamps k to the available rows", "[adasyn]") {
    const auto ds = one_dim({0.0, 2.0, 2.1}, {0, 1, 1});
    opclass::AdasynConfig cfg;
    cfg.k = 50; // far more than n - 1
    const auto out = opclass::adasyn(ds, cfg);
    REQUIRE(out.rows() >= 3);
}

TEST_CASE("adasyn beta scales the synthetic budget", "[adasyn]") {
    const auto ds = opclass::synth_corpus(20, 100, 5, 0.5, 9);
    opclass::AdasynConfig cfg;
    cfg.beta = 0.0;
    opclass::AdasynAudit audit;
    opclass::adasyn(ds, cfg, &audit);
    REQUIRE(audit.g_total == 0);
    cfg.beta = 1.0;
    opclass::adasyn(ds, cfg, &audit);
    // round-half-up per point keeps the total near the gap
    REQUIRE(audit.g_total >= 70);
    REQUIRE(audit.g_total <= 90);
}

TEST_CASE("adasyn rejects degenerate inputs", "[adasyn]") {
    REQUIRE_THROWS_AS(opclass::adasyn(one_dim({1.0}, {0}), {}), opclass::InsufficientRows);
    REQUIRE_THROWS_AS(opclass::adasyn(one_dim({1.0, 2.0}, {1, 1}), {}), opclass::SingleClass);
    opclass::AdasynConfig bad;
    bad.k = 0;
    REQUIRE_THROWS_AS(opclass::adasyn(one_dim({1.0, 2.0}, {0, 1}), bad), opclass::ConfigError);
    bad.k = 5;
    bad.beta = 1.5;
    REQUIRE_THROWS_AS(opclass::adasyn(one_dim({1.0, 2.0}, {0, 1}), bad), opclass::ConfigError);
}

TEST_CASE("adasyn treats whichever class is smaller as the minority", "[adasyn]") {
    // label 1 is the rare class here
    const auto ds = one_dim({0.0, 0.2, 5.0, 5.1, 5.2, 5.3}, {1, 1, 0, 0, 0, 0});
    opclass::AdasynAudit audit;
    const auto out = opclass::adasyn(ds, {}, &audit);
    REQUIRE(audit.minority_label == 1);
    for (Eigen::Index i = 6; i < out.rows(); ++i) REQUIRE(out.labels[std::size_t(i)] == 1);
}
