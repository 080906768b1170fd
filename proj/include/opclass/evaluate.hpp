#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "opclass/adasyn.hpp"
#include "opclass/classifier.hpp"
#include "opclass/dataset.hpp"
#include "opclass/errors.hpp"
#include "opclass/format.hpp"
#include "opclass/reduce.hpp"
#include "opclass/rng.hpp"

namespace opclass {

// ---------------------------------------------------------------------------
// Fold planning

// Seeded shuffle, then contiguous cuts; the first n % k folds get one extra
// row. Returns fold -> original row indices (each list sorted ascending).
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("kfold: need at least 2 folds");
    if (n < static_cast<std::size_t>(k))
        throw TooFewRows("TooFewRows: " + std::to_string(n) + " rows cannot fill " +
                         std::to_string(k) + " folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitRng rng(seed);
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);
    std::size_t at = 0;
    for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                        order.begin() + static_cast<std::ptrdiff_t>(at + len));
        std::sort(folds[f].begin(), folds[f].end());
        at += len;
    }
    return folds;
}

// Per-class shuffle and round-robin deal, so every fold keeps roughly the
// global class ratio.
inline std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels, int k,
                                                              std::uint64_t seed) {
    if (k < 2) throw ConfigError("kfold: need at least 2 folds");
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    for (int label = 0; label <= 1; ++label) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) members.push_back(i);
        SplitRng rng(derive_seed(seed, "class", label));
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i)
            folds[i % static_cast<std::size_t>(k)].push_back(members[i]);
    }
    for (auto& fold : folds) {
        if (fold.empty())
            throw TooFewRows("TooFewRows: a stratified fold came out empty; use fewer folds");
        std::sort(fold.begin(), fold.end());
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Confusion counts and derived metrics (label 1 is the positive class)

struct ConfusionMatrix {
    long tp = 0, fn = 0, tn = 0, fp = 0;

    long total() const { return tp + fn + tn + fp; }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        tp += o.tp;
        fn += o.fn;
        tn += o.tn;
        fp += o.fp;
        return *this;
    }
};

inline ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& pred) {
    if (truth.size() != pred.size())
        throw LengthMismatch("LengthMismatch: truth and prediction counts differ");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 1)
            ++(pred[i] == 1 ? cm.tp : cm.fn);
        else
            ++(pred[i] == 1 ? cm.fp : cm.tn);
    }
    return cm;
}

// A metric whose denominator is zero reports 0 and drops its defined flag;
// downstream CSVs carry the flag so 0-by-convention is never mistaken for a
// measured 0.
struct Metrics {
    double accuracy = 0.0, tpr = 0.0, tnr = 0.0, ppv = 0.0;
    bool accuracy_defined = false, tpr_defined = false, tnr_defined = false, ppv_defined = false;

    std::string undefined_tokens() const {
        std::string s;
        auto add = [&s](const char* tok) {
            if (!s.empty()) s += ';';
            s += tok;
        };
        if (!accuracy_defined) add("accuracy");
        if (!tpr_defined) add("tpr");
        if (!tnr_defined) add("tnr");
        if (!ppv_defined) add("ppv");
        return s;
    }
};

inline Metrics metrics_from(const ConfusionMatrix& cm) {
    Metrics m;
    if (cm.total() > 0) {
        m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
        m.accuracy_defined = true;
    }
    if (cm.tp + cm.fn > 0) {
        m.tpr = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
        m.tpr_defined = true;
    }
    if (cm.tn + cm.fp > 0) {
        m.tnr = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
        m.tnr_defined = true;
    }
    if (cm.tp + cm.fp > 0) {
        m.ppv = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
        m.ppv_defined = true;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Experiment grid

struct GridConfig {
    std::vector<ReducerKind> reducers{ReducerKind::none, ReducerKind::variance, ReducerKind::ae1,
                                      ReducerKind::ae3};
    std::vector<ClassifierKind> classifiers{ClassifierKind::rf, ClassifierKind::dnn2,
                                            ClassifierKind::dnn4, ClassifierKind::dnn7};
    int n_folds = 3;
    bool stratified = false;
    std::uint64_t master_seed = 0;
    int jobs = 1; // 0: one worker per hardware thread
    int adasyn_k = 5;
    double adasyn_beta = 1.0;
    double vt_threshold = 0.1;
    Eigen::Index bottleneck = 32;
    nn::TrainConfig ae_train;  // autoencoder regimen
    nn::TrainConfig dnn_train; // dense-net regimen
    double dnn_dropout = 0.1;
    RandomForestConfig forest;

    // One line per knob; hashing this string identifies the run setup.
    std::string canonical_string() const {
        std::ostringstream os;
        os << "reducers=";
        for (std::size_t i = 0; i < reducers.size(); ++i)
            os << (i ? "," : "") << reducer_token(reducers[i]);
        os << "\nclassifiers=";
        for (std::size_t i = 0; i < classifiers.size(); ++i)
            os << (i ? "," : "") << classifier_token(classifiers[i]);
        os << "\nfolds=" << n_folds << "\nstratified=" << (stratified ? 1 : 0)
           << "\nmaster_seed=" << master_seed << "\nadasyn_k=" << adasyn_k
           << "\nadasyn_beta=" << format_double(adasyn_beta)
           << "\nvt_threshold=" << format_double(vt_threshold) << "\nbottleneck=" << bottleneck;
        const auto train_block = [&os](const char* name, const nn::TrainConfig& tc) {
            os << '\n' << name << ".epochs=" << tc.epochs << '\n' << name << ".batch=" << tc.batch_size
               << '\n' << name << ".lr=" << format_double(tc.alpha) << '\n'
               << name << ".val_fraction=" << format_double(tc.validation_fraction);
        };
        train_block("ae", ae_train);
        train_block("dnn", dnn_train);
        os << "\ndnn.dropout=" << format_double(dnn_dropout);
        os << "\nforest.trees=" << forest.n_trees << "\nforest.max_depth=" << forest.max_depth
           << "\nforest.min_split=" << forest.min_samples_split
           << "\nforest.features=" << forest.features_per_split
           << "\nforest.bootstrap=" << (forest.bootstrap ? 1 : 0) << '\n';
        return os.str();
    }
};

struct FoldRecord {
    int fold = 0;
    ConfusionMatrix cm;
    Metrics metrics;
    nn::TrainingTrace trace; // dense classifiers only
};

struct CellResult {
    ReducerKind reducer;
    ClassifierKind classifier;
    std::vector<FoldRecord> folds;
    ConfusionMatrix total;
    Metrics aggregate;
};

struct ReducerRun {
    ReducerKind kind;
    int fold = 0;
    Eigen::Index output_dim = 0;
    nn::TrainingTrace trace; // autoencoders only
};

struct EvaluationReport {
    GridConfig config;
    std::uint64_t config_hash = 0;
    std::size_t n_rows = 0;
    std::vector<std::string> row_ids;
    std::vector<std::vector<std::size_t>> folds; // fold -> held-out rows
    std::vector<AdasynAudit> balance;            // per fold
    std::vector<std::vector<std::string>> fit_rows; // per fold: ids the models trained on
    std::vector<ReducerRun> reducer_runs;        // reducer-major, fold-minor
    std::vector<CellResult> cells;               // reducer-major, classifier-minor
};

// A component failure inside one grid cell, re-raised with the coordinates
// attached; keeps the original exit code.
class GridTaskError : public Error {
public:
    GridTaskError(const std::string& what, int code) : Error(what), code_(code) {}
    int exit_code() const noexcept override { return code_; }

private:
    int code_;
};

namespace detail {

inline void parallel_for(std::size_t n_tasks, int jobs, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs)
                                   : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n_tasks);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            if (failed.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace detail

// Cross-validated grid: per fold, oversample the training split, fit each
// reducer on the balanced split only, then train every classifier on the
// reduced features. Held-out rows are never seen by balancing, reduction or
// training; the report logs the exact row ids each fold fitted on.
inline EvaluationReport run_experiment(const LabeledDataset& ds, const GridConfig& cfg) {
    if (cfg.reducers.empty() || cfg.classifiers.empty())
        throw ConfigError("experiment: need at least one reducer and one classifier");
    const std::size_t n = static_cast<std::size_t>(ds.rows());

    EvaluationReport report;
    report.config = cfg;
    const std::string canon = cfg.canonical_string();
    report.config_hash = fnv1a64(canon.data(), canon.size());
    report.n_rows = n;
    report.row_ids = ds.row_ids;
    report.folds = cfg.stratified
                       ? stratified_kfold(ds.labels, cfg.n_folds, derive_seed(cfg.master_seed, "folds"))
                       : kfold_split(n, cfg.n_folds, derive_seed(cfg.master_seed, "folds"));

    const std::size_t F = static_cast<std::size_t>(cfg.n_folds);
    const std::size_t R = cfg.reducers.size();
    const std::size_t C = cfg.classifiers.size();

    std::vector<LabeledDataset> balanced(F), test_sets(F);
    report.balance.resize(F);
    report.fit_rows.resize(F);
    for (std::size_t f = 0; f < F; ++f) {
        std::vector<std::size_t> train_idx;
        train_idx.reserve(n - report.folds[f].size());
        for (std::size_t g = 0; g < F; ++g)
            if (g != f) train_idx.insert(train_idx.end(), report.folds[g].begin(), report.folds[g].end());
        std::sort(train_idx.begin(), train_idx.end());

        AdasynConfig ac;
        ac.k = cfg.adasyn_k;
        ac.beta = cfg.adasyn_beta;
        ac.seed = derive_seed(cfg.master_seed, "adasyn", f);
        balanced[f] = adasyn(subset(ds, train_idx), ac, &report.balance[f]);
        test_sets[f] = subset(ds, report.folds[f]);
        report.fit_rows[f] = balanced[f].row_ids;
    }

    report.reducer_runs.resize(R * F);
    std::vector<FoldRecord> slots(R * C * F);

    detail::parallel_for(R * F, cfg.jobs, [&](std::size_t task) {
        const std::size_t r = task / F;
        const std::size_t f = task % F;
        const ReducerKind rk = cfg.reducers[r];
        const char* rtok = reducer_token(rk);
        const auto tag = [&](const char* ctok) {
            std::string at = "reducer=" + std::string(rtok);
            if (ctok) at += " classifier=" + std::string(ctok);
            return at + " fold=" + std::to_string(f);
        };

        ReducerSpec rs;
        rs.kind = rk;
        rs.threshold = cfg.vt_threshold;
        rs.bottleneck = cfg.bottleneck;
        rs.train = cfg.ae_train;
        nn::TrainingTrace rtrace;
        Eigen::MatrixXd train_x, test_x;
        try {
            const ReducerModel reducer = fit_reducer(
                balanced[f].matrix, rs, derive_seed(cfg.master_seed, "reduce", rtok, f), &rtrace);
            train_x = reducer.apply(balanced[f].matrix);
            test_x = reducer.apply(test_sets[f].matrix);
            report.reducer_runs[task] =
                ReducerRun{rk, static_cast<int>(f), reducer.output_dim(), std::move(rtrace)};
        } catch (const Error& e) {
            throw GridTaskError("[" + tag(nullptr) + "] " + e.what(), e.exit_code());
        }

        for (std::size_t c = 0; c < C; ++c) {
            const ClassifierKind ck = cfg.classifiers[c];
            const char* ctok = classifier_token(ck);
            ClassifierSpec spec;
            spec.kind = ck;
            spec.forest = cfg.forest;
            spec.train = cfg.dnn_train;
            spec.dropout = cfg.dnn_dropout;
            nn::TrainingTrace ctrace;
            FoldRecord rec;
            rec.fold = static_cast<int>(f);
            try {
                const ClassifierModel model = train_classifier(
                    train_x, balanced[f].labels, spec,
                    derive_seed(cfg.master_seed, "train", rtok, ctok, f), &ctrace);
                rec.cm = confusion(test_sets[f].labels, model.predict(test_x));
            } catch (const Error& e) {
                throw GridTaskError("[" + tag(ctok) + "] " + e.what(), e.exit_code());
            }
            rec.metrics = metrics_from(rec.cm);
            rec.trace = std::move(ctrace);
            slots[(r * C + c) * F + f] = std::move(rec);
        }
    });

    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
            CellResult cell;
            cell.reducer = cfg.reducers[r];
            cell.classifier = cfg.classifiers[c];
            for (std::size_t f = 0; f < F; ++f) {
                cell.folds.push_back(std::move(slots[(r * C + c) * F + f]));
                cell.total += cell.folds.back().cm;
            }
            cell.aggregate = metrics_from(cell.total);
            report.cells.push_back(std::move(cell));
        }
    return report;
}

// ---------------------------------------------------------------------------
// Report directory

namespace detail {

struct BaselineRow {
    const char* reducer;
    const char* classifier;
    const char* accuracy;
    const char* tpr;
    const char* tnr;
    const char* ppv;
};

// Detection quality published for the original Malicia-derived corpus
// (2,819 benign / 11,308 malware, 1,600 opcodes); kept beside locally
// produced grids for context.
inline const std::vector<BaselineRow>& reference_baseline() {
    static const std::vector<BaselineRow> rows = {
        {"none", "rf", "99.74", "99.48", "100.0", "100.0"},
        {"vt", "rf", "99.78", "99.59", "99.97", "99.97"},
        {"ae1", "rf", "99.41", "98.86", "99.97", "99.97"},
        {"ae3", "rf", "99.36", "98.72", "100.0", "100.0"},
        {"none", "dnn2", "97.79", "96.33", "99.26", "99.24"},
        {"vt", "dnn2", "98.84", "98.32", "99.37", "99.37"},
        {"ae1", "dnn2", "96.95", "94.57", "99.37", "99.34"},
        {"ae3", "dnn2", "96.25", "93.75", "98.79", "98.74"},
        {"none", "dnn4", "97.42", "95.38", "99.48", "99.46"},
        {"vt", "dnn4", "98.69", "97.96", "99.42", "99.42"},
        {"ae1", "dnn4", "98.99", "98.29", "99.70", "99.70"},
        {"ae3", "dnn4", "97.16", "98.61", "95.68", "95.85"},
        {"none", "dnn7", "96.15", "99.05", "93.20", "93.66"},
        {"vt", "dnn7", "96.20", "98.89", "93.48", "93.89"},
        {"ae1", "dnn7", "98.99", "98.61", "99.81", "99.81"},
        {"ae3", "dnn7", "93.60", "87.97", "99.31", "99.23"},
    };
    return rows;
}

class ReportFile {
public:
    ReportFile(const std::filesystem::path& path, const EvaluationReport& report) : out_(path) {
        if (!out_) throw DataError("cannot open '" + path.string() + "' for writing");
        out_ << "# config_hash=" << hex64(report.config_hash) << "\n";
        out_ << "# master_seed=" << report.config.master_seed << "\n";
        path_ = path;
    }

    std::ofstream& stream() { return out_; }

    void close() {
        out_.close();
        if (!out_) throw DataError("error writing '" + path_.string() + "'");
    }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

inline void write_metric_row(std::ofstream& os, const Metrics& m, const ConfusionMatrix& cm) {
    os << format_percent(m.accuracy) << ',' << format_percent(m.tpr) << ',' << format_percent(m.tnr)
       << ',' << format_percent(m.ppv) << ',' << cm.tp << ',' << cm.fn << ',' << cm.tn << ','
       << cm.fp << ',' << m.undefined_tokens() << '\n';
}

inline void write_trace_file(const std::filesystem::path& path, const EvaluationReport& report,
                             const nn::TrainingTrace& trace) {
    ReportFile file(path, report);
    file.stream() << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < trace.train_loss.size(); ++e)
        file.stream() << e + 1 << ',' << format_double(trace.train_loss[e]) << ','
                      << format_double(trace.val_loss[e]) << '\n';
    file.close();
}

} // namespace detail

// Writes the report directory: aggregate.csv / folds.csv with the metric
// percentages, the fold assignment, per-fold oversampling audits and fitted
// row ids, loss traces, and the published-corpus baseline. Identical config
// and seed produce byte-identical output.
inline void write_report(const EvaluationReport& report, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "traces");

    {
        detail::ReportFile f(dir / "aggregate.csv", report);
        f.stream() << "features,classifier,accuracy,tpr,tnr,ppv,tp,fn,tn,fp,undefined\n";
        for (const auto& cell : report.cells) {
            f.stream() << reducer_token(cell.reducer) << ',' << classifier_token(cell.classifier) << ',';
            detail::write_metric_row(f.stream(), cell.aggregate, cell.total);
        }
        f.close();
    }
    {
        detail::ReportFile f(dir / "folds.csv", report);
        f.stream() << "features,classifier,fold,accuracy,tpr,tnr,ppv,tp,fn,tn,fp,undefined\n";
        for (const auto& cell : report.cells)
            for (const auto& fr : cell.folds) {
                f.stream() << reducer_token(cell.reducer) << ',' << classifier_token(cell.classifier)
                           << ',' << fr.fold << ',';
                detail::write_metric_row(f.stream(), fr.metrics, fr.cm);
            }
        f.close();
    }
    {
        detail::ReportFile f(dir / "fold_assignment.csv", report);
        f.stream() << "row_id,fold\n";
        std::vector<int> fold_of(report.n_rows, -1);
        for (std::size_t g = 0; g < report.folds.size(); ++g)
            for (const auto i : report.folds[g]) fold_of[i] = static_cast<int>(g);
        for (std::size_t i = 0; i < report.n_rows; ++i)
            f.stream() << report.row_ids[i] << ',' << fold_of[i] << '\n';
        f.close();
    }
    for (std::size_t f = 0; f < report.balance.size(); ++f) {
        detail::ReportFile file(dir / ("balance_fold" + std::to_string(f) + ".csv"), report);
        const auto& audit = report.balance[f];
        file.stream() << "# minority_label=" << audit.minority_label << " minority="
                      << audit.minority_count << " majority=" << audit.majority_count
                      << " generated=" << audit.generated << "\n";
        file.stream() << "row_id,r,r_hat,g\n";
        for (const auto& pt : audit.points)
            file.stream() << pt.row_id << ',' << format_double(pt.r) << ',' << format_double(pt.r_hat)
                          << ',' << pt.g << '\n';
        file.close();
    }
    for (std::size_t f = 0; f < report.balance.size(); ++f) {
        detail::ReportFile file(dir / ("synthetics_fold" + std::to_string(f) + ".csv"), report);
        file.stream() << "synthetic_row_id,parent_a,parent_b,lambda\n";
        for (const auto& rec : report.balance[f].synthetics)
            file.stream() << rec.synthetic_id << ',' << rec.parent_a << ',' << rec.parent_b << ','
                          << format_double(rec.lambda) << '\n';
        file.close();
    }
    for (std::size_t f = 0; f < report.fit_rows.size(); ++f) {
        detail::ReportFile file(dir / ("fit_rows_fold" + std::to_string(f) + ".csv"), report);
        file.stream() << "row_id\n";
        for (const auto& id : report.fit_rows[f]) file.stream() << id << '\n';
        file.close();
    }
    for (const auto& run : report.reducer_runs) {
        if (run.trace.train_loss.empty()) continue;
        detail::write_trace_file(dir / "traces" /
                                     ("reduce_" + std::string(reducer_token(run.kind)) + "_fold" +
                                      std::to_string(run.fold) + ".csv"),
                                 report, run.trace);
    }
    for (const auto& cell : report.cells)
        for (const auto& fr : cell.folds) {
            if (fr.trace.train_loss.empty()) continue;
            detail::write_trace_file(dir / "traces" /
                                         ("cell_" + std::string(reducer_token(cell.reducer)) + "_" +
                                          classifier_token(cell.classifier) + "_fold" +
                                          std::to_string(fr.fold) + ".csv"),
                                     report, fr.trace);
        }
    {
        detail::ReportFile f(dir / "reference_baseline.csv", report);
        f.stream() << "# published results on the original Malicia-derived corpus"
                      " (2,819 benign / 11,308 malware, 1,600 opcodes); comparison context only\n";
        f.stream() << "features,classifier,accuracy,tpr,tnr,ppv\n";
        for (const auto& row : detail::reference_baseline())
            f.stream() << row.reducer << ',' << row.classifier << ',' << row.accuracy << ','
                       << row.tpr << ',' << row.tnr << ',' << row.ppv << '\n';
        f.close();
    }
}

} // namespace opclass
