// Command-line front end: extract | synth | balance | reduce | train |
// evaluate | run. Exit codes: 0 ok, 2 config, 3 data, 4 numeric.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opclass/opclass.hpp"

namespace fs = std::filesystem;

namespace {

struct Global {
    std::uint64_t seed = 0;
    int jobs = 1;
    bool verbose = false;
};

std::vector<std::string> stamp_comments(const std::string& canonical, std::uint64_t seed) {
    const std::uint64_t hash = opclass::fnv1a64(canonical.data(), canonical.size());
    return {"config_hash=" + opclass::hex64(hash), "master_seed=" + std::to_string(seed)};
}

int cmd_extract(const Global& g, const std::string& asm_dir, const std::string& labels_path,
                const std::string& out_csv, const std::string& master_out) {
    const auto result = opclass::extract_corpus(asm_dir, opclass::load_label_map(labels_path));
    for (const auto& file : result.skipped)
        std::cerr << "warning: no instructions in '" << file << "', skipped\n";

    std::ostringstream canon;
    canon << "cmd=extract\nasm_dir=" << asm_dir << "\nlabels=" << labels_path
          << "\nfiles=" << result.dataset.rows() << "\nopcodes=" << result.master.size() << '\n';
    opclass::persist_dataset(result.dataset, out_csv, stamp_comments(canon.str(), g.seed));

    std::ofstream mout(master_out);
    if (!mout) throw opclass::DataError("cannot open '" + master_out + "' for writing");
    for (const auto& op : result.master.opcodes) mout << op << '\n';
    mout.close();
    if (!mout) throw opclass::DataError("error writing '" + master_out + "'");

    if (g.verbose)
        std::cerr << "extracted " << result.dataset.rows() << " rows x " << result.dataset.cols()
                  << " opcodes\n";
    return 0;
}

int cmd_synth(const Global& g, int minority, int majority, int opcodes, double separation,
              const std::string& out_csv) {
    const auto ds = opclass::synth_corpus(minority, majority, opcodes, separation, g.seed);
    std::ostringstream canon;
    canon << "cmd=synth\nminority=" << minority << "\nmajority=" << majority
          << "\nopcodes=" << opcodes << "\nseparation=" << opclass::format_double(separation)
          << '\n';
    opclass::persist_dataset(ds, out_csv, stamp_comments(canon.str(), g.seed));
    if (g.verbose) std::cerr << "wrote " << ds.rows() << " rows to " << out_csv << '\n';
    return 0;
}

int cmd_balance(const Global& g, const std::string& in_csv, const std::string& out_csv, int k,
                double beta, const std::string& audit_path) {
    const auto ds = opclass::load_dataset(in_csv);
    opclass::AdasynConfig cfg;
    cfg.k = k;
    cfg.beta = beta;
    cfg.seed = g.seed;
    opclass::AdasynAudit audit;
    const auto balanced = opclass::adasyn(ds, cfg, &audit);

    std::ostringstream canon;
    canon << "cmd=balance\nk=" << k << "\nbeta=" << opclass::format_double(beta) << '\n';
    const auto comments = stamp_comments(canon.str(), g.seed);
    opclass::persist_dataset(balanced, out_csv, comments);

    if (!audit_path.empty()) {
        std::ofstream out(audit_path);
        if (!out) throw opclass::DataError("cannot open '" + audit_path + "' for writing");
        for (const auto& c : comments) out << "# " << c << '\n';
        out << "synthetic_row_id,parent_a,parent_b,lambda\n";
        for (const auto& rec : audit.synthetics)
            out << rec.synthetic_id << ',' << rec.parent_a << ',' << rec.parent_b << ','
                << opclass::format_double(rec.lambda) << '\n';
        out.close();
        if (!out) throw opclass::DataError("error writing '" + audit_path + "'");
    }
    if (g.verbose)
        std::cerr << "generated " << audit.generated << " synthetic rows (minority label "
                  << audit.minority_label << ")\n";
    return 0;
}

int cmd_reduce_fit(const Global& g, const std::string& kind, double threshold, long long bottleneck,
                   const opclass::nn::TrainConfig& tc, const std::string& in_csv,
                   const std::string& model_path) {
    const auto ds = opclass::load_dataset(in_csv);
    opclass::ReducerSpec spec;
    spec.kind = opclass::reducer_from_token(kind);
    spec.threshold = threshold;
    spec.bottleneck = static_cast<Eigen::Index>(bottleneck);
    spec.train = tc;
    const auto model = opclass::fit_reducer(ds.matrix, spec, g.seed);
    opclass::BinaryWriter out(model_path);
    model.save(out);
    out.close();
    if (g.verbose)
        std::cerr << "fitted " << kind << ": " << ds.cols() << " -> " << model.output_dim()
                  << " columns\n";
    return 0;
}

int cmd_reduce_apply(const Global& g, const std::string& model_path, const std::string& in_csv,
                     const std::string& out_csv) {
    opclass::BinaryReader in(model_path);
    const auto model = opclass::ReducerModel::load(in);
    const auto ds = opclass::load_dataset(in_csv);

    opclass::LabeledDataset reduced;
    reduced.matrix = model.apply(ds.matrix);
    reduced.labels = ds.labels;
    reduced.row_ids = ds.row_ids;
    switch (model.kind) {
        case opclass::ReducerKind::none: reduced.column_names = ds.column_names; break;
        case opclass::ReducerKind::variance:
            for (const auto j : model.kept)
                reduced.column_names.push_back(ds.column_names[static_cast<std::size_t>(j)]);
            break;
        default:
            for (Eigen::Index j = 0; j < reduced.matrix.cols(); ++j)
                reduced.column_names.push_back("code_" + std::to_string(j));
    }

    std::ostringstream canon;
    canon << "cmd=reduce-apply\nmodel=" << model_path << '\n';
    opclass::persist_dataset(reduced, out_csv, stamp_comments(canon.str(), g.seed));
    if (g.verbose) std::cerr << "reduced to " << reduced.cols() << " columns\n";
    return 0;
}

int cmd_train(const Global& g, const std::string& kind, const std::string& in_csv,
              const std::string& reducer_path, const std::string& out_path,
              const opclass::ClassifierSpec& knobs) {
    auto ds = opclass::load_dataset(in_csv);
    Eigen::MatrixXd x = ds.matrix;
    if (!reducer_path.empty()) {
        opclass::BinaryReader rin(reducer_path);
        x = opclass::ReducerModel::load(rin).apply(x);
    }
    opclass::ClassifierSpec spec = knobs;
    spec.kind = opclass::classifier_from_token(kind);
    const auto model = opclass::train_classifier(x, ds.labels, spec, g.seed);
    opclass::BinaryWriter out(out_path);
    model.save(out);
    out.close();
    if (g.verbose) std::cerr << "trained " << kind << " on " << x.rows() << " rows\n";
    return 0;
}

// "all" or "<reducers>:<classifiers>", each side a comma list.
void parse_grid(const std::string& token, opclass::GridConfig& grid) {
    if (token == "all") return;
    const auto sides = opclass::split(token, ':');
    if (sides.size() != 2)
        throw opclass::ConfigError("--grid expects 'all' or '<reducers>:<classifiers>', got '" +
                                   token + "'");
    grid.reducers.clear();
    for (const auto part : opclass::split(sides[0], ','))
        grid.reducers.push_back(opclass::reducer_from_token(opclass::trim(part)));
    grid.classifiers.clear();
    for (const auto part : opclass::split(sides[1], ','))
        grid.classifiers.push_back(opclass::classifier_from_token(opclass::trim(part)));
}

void print_aggregate(const opclass::EvaluationReport& report) {
    std::cout << "features,classifier,accuracy,tpr,tnr,ppv\n";
    for (const auto& cell : report.cells)
        std::cout << opclass::reducer_token(cell.reducer) << ','
                  << opclass::classifier_token(cell.classifier) << ','
                  << opclass::format_percent(cell.aggregate.accuracy) << ','
                  << opclass::format_percent(cell.aggregate.tpr) << ','
                  << opclass::format_percent(cell.aggregate.tnr) << ','
                  << opclass::format_percent(cell.aggregate.ppv) << '\n';
}

int cmd_evaluate(const Global& g, const std::string& in_csv, const std::string& out_dir,
                 opclass::GridConfig grid) {
    const auto ds = opclass::load_dataset(in_csv);
    grid.master_seed = g.seed;
    grid.jobs = g.jobs;
    const auto report = opclass::run_experiment(ds, grid);
    opclass::write_report(report, out_dir);
    print_aggregate(report);
    return 0;
}

int cmd_run(const Global& g, bool seed_given, bool jobs_given, const std::string& config_path,
            const std::string& out_dir) {
    auto cfg = opclass::load_experiment_config(config_path);
    if (seed_given) {
        cfg.grid.master_seed = g.seed;
        opclass::refresh_hash(cfg);
    }
    if (jobs_given) cfg.grid.jobs = g.jobs;
    const auto outcome = opclass::run_pipeline(cfg);
    opclass::write_run(outcome, out_dir);
    print_aggregate(outcome.report);
    if (g.verbose) std::cerr << "report written to " << out_dir << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"opcode-frequency malware detection pipeline"};
    app.require_subcommand(1);

    Global g;
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--jobs", g.jobs, "worker threads (0 = all cores)")
        ->capture_default_str()
        ->check(CLI::Range(0, 4096));
    app.add_flag("--verbose", g.verbose, "progress details on stderr");

    // extract
    auto* extract = app.add_subcommand("extract", "disassembly listings -> opcode-frequency CSV");
    extract->fallthrough();
    std::string asm_dir, labels_path, extract_out, master_out;
    extract->add_option("--asm-dir", asm_dir, "directory of disassembly listings")
        ->required()
        ->check(CLI::ExistingDirectory);
    extract->add_option("--labels", labels_path, "CSV of file_id,label (1 = malware)")
        ->required()
        ->check(CLI::ExistingFile);
    extract->add_option("--out", extract_out, "feature CSV to write")->required();
    extract->add_option("--master-out", master_out, "master opcode list to write")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
    synth->fallthrough();
    int s_minority = 200, s_majority = 800, s_opcodes = 50;
    double s_sep = 0.9;
    std::string synth_out;
    synth->add_option("--minority", s_minority)->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--majority", s_majority)->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--opcodes", s_opcodes)->capture_default_str()->check(CLI::Range(2, 1000000));
    synth->add_option("--sep", s_sep, "class separation in [0,1]")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--out", synth_out, "CSV to write")->required();

    // balance
    auto* balance = app.add_subcommand("balance", "ADASYN-oversample the minority class");
    balance->fallthrough();
    std::string b_in, b_out, b_audit;
    int b_k = 5;
    double b_beta = 1.0;
    balance->add_option("--in", b_in, "input CSV")->required()->check(CLI::ExistingFile);
    balance->add_option("--out", b_out, "balanced CSV to write")->required();
    balance->add_option("--k", b_k, "neighbourhood size")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    balance->add_option("--beta", b_beta, "fraction of the class gap to fill")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    balance->add_option("--audit", b_audit, "per-synthetic parent/lambda CSV");

    // reduce
    auto* reduce = app.add_subcommand("reduce", "fit or apply a feature reducer");
    reduce->fallthrough();
    bool r_fit = false, r_apply = false;
    std::string r_kind = "vt", r_in, r_model, r_out;
    double r_threshold = 0.1;
    long long r_bottleneck = 32;
    opclass::nn::TrainConfig r_train;
    auto* fit_flag = reduce->add_flag("--fit", r_fit, "fit a reducer on --in");
    reduce->add_flag("--apply", r_apply, "apply --model to --in")->excludes(fit_flag);
    reduce->add_option("--kind", r_kind, "none|vt|ae1|ae3")->capture_default_str();
    reduce->add_option("--threshold", r_threshold, "variance cut")->capture_default_str();
    reduce->add_option("--bottleneck", r_bottleneck, "autoencoder code width")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    reduce->add_option("--epochs", r_train.epochs)->capture_default_str()->check(CLI::Range(0, 1000000));
    reduce->add_option("--batch", r_train.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
    reduce->add_option("--lr", r_train.alpha)->capture_default_str();
    reduce->add_option("--val-fraction", r_train.validation_fraction)
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.999));
    reduce->add_option("--in", r_in, "input CSV")->required()->check(CLI::ExistingFile);
    reduce->add_option("--model", r_model, "reducer model file")->required();
    reduce->add_option("--out", r_out, "reduced CSV (apply mode)");

    // train
    auto* train = app.add_subcommand("train", "train one classifier");
    train->fallthrough();
    std::string t_kind, t_in, t_reducer, t_out;
    opclass::ClassifierSpec t_spec;
    train->add_option("--model", t_kind, "rf|dnn2|dnn4|dnn7")->required();
    train->add_option("--in", t_in, "training CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--reducer", t_reducer, "fitted reducer to apply first")
        ->check(CLI::ExistingFile);
    train->add_option("--out", t_out, "model file to write")->required();
    train->add_option("--trees", t_spec.forest.n_trees)->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--max-depth", t_spec.forest.max_depth, "0 = unlimited")
        ->capture_default_str()
        ->check(CLI::Range(0, 1000000));
    train->add_option("--min-samples-split", t_spec.forest.min_samples_split)
        ->capture_default_str()
        ->check(CLI::Range(2, 1000000));
    train->add_option("--features-per-split", t_spec.forest.features_per_split, "0 = ceil(sqrt(p))")
        ->capture_default_str()
        ->check(CLI::Range(0, 1000000));
    bool t_no_bootstrap = false;
    train->add_flag("--no-bootstrap", t_no_bootstrap, "train each tree on the full split");
    train->add_option("--epochs", t_spec.train.epochs)->capture_default_str()->check(CLI::Range(0, 1000000));
    train->add_option("--batch", t_spec.train.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--lr", t_spec.train.alpha)->capture_default_str();
    train->add_option("--dropout", t_spec.dropout)->capture_default_str()->check(CLI::Range(0.0, 0.999));
    train->add_option("--val-fraction", t_spec.train.validation_fraction)
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.999));

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "cross-validate a reducer x classifier grid");
    evaluate->fallthrough();
    std::string e_in, e_out, e_grid = "all";
    opclass::GridConfig e_cfg;
    evaluate->add_option("--in", e_in, "dataset CSV")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--grid", e_grid, "'all' or '<reducers>:<classifiers>'")
        ->capture_default_str();
    evaluate->add_option("--out", e_out, "report directory")->required();
    evaluate->add_option("--folds", e_cfg.n_folds)->capture_default_str()->check(CLI::Range(2, 1000));
    evaluate->add_flag("--stratified", e_cfg.stratified, "class-balanced folds");
    evaluate->add_option("--k", e_cfg.adasyn_k)->capture_default_str()->check(CLI::PositiveNumber);
    evaluate->add_option("--beta", e_cfg.adasyn_beta)->capture_default_str()->check(CLI::Range(0.0, 1.0));
    evaluate->add_option("--vt-threshold", e_cfg.vt_threshold)->capture_default_str();
    long long e_bottleneck = 32;
    evaluate->add_option("--bottleneck", e_bottleneck)->capture_default_str()->check(CLI::PositiveNumber);
    evaluate->add_option("--ae-epochs", e_cfg.ae_train.epochs)->capture_default_str();
    evaluate->add_option("--dnn-epochs", e_cfg.dnn_train.epochs)->capture_default_str();
    evaluate->add_option("--batch", e_cfg.dnn_train.batch_size)->capture_default_str();
    evaluate->add_option("--lr", e_cfg.dnn_train.alpha)->capture_default_str();
    evaluate->add_option("--dropout", e_cfg.dnn_dropout)->capture_default_str()->check(CLI::Range(0.0, 0.999));
    evaluate->add_option("--trees", e_cfg.forest.n_trees)->capture_default_str()->check(CLI::PositiveNumber);

    // run
    auto* run = app.add_subcommand("run", "full pipeline from a config file");
    run->fallthrough();
    std::string run_config, run_out;
    run->add_option("--config", run_config, "experiment config")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--out", run_out, "report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(opclass::exit_config);
    }

    try {
        if (*extract) return cmd_extract(g, asm_dir, labels_path, extract_out, master_out);
        if (*synth) return cmd_synth(g, s_minority, s_majority, s_opcodes, s_sep, synth_out);
        if (*balance) return cmd_balance(g, b_in, b_out, b_k, b_beta, b_audit);
        if (*reduce) {
            if (r_fit == r_apply)
                throw opclass::ConfigError("reduce: pass exactly one of --fit / --apply");
            if (r_fit) return cmd_reduce_fit(g, r_kind, r_threshold, r_bottleneck, r_train, r_in, r_model);
            if (r_out.empty()) throw opclass::ConfigError("reduce --apply: --out is required");
            return cmd_reduce_apply(g, r_model, r_in, r_out);
        }
        if (*train) {
            t_spec.forest.bootstrap = !t_no_bootstrap;
            return cmd_train(g, t_kind, t_in, t_reducer, t_out, t_spec);
        }
        if (*evaluate) {
            parse_grid(e_grid, e_cfg);
            e_cfg.bottleneck = static_cast<Eigen::Index>(e_bottleneck);
            return cmd_evaluate(g, e_in, e_out, e_cfg);
        }
        if (*run)
            return cmd_run(g, app.count("--seed") > 0, app.count("--jobs") > 0, run_config, run_out);
    } catch (const opclass::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
