#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "opclass/errors.hpp"
#include "opclass/evaluate.hpp"
#include "opclass/format.hpp"

namespace opclass {

struct DatasetConfig {
    enum class Source { synth, csv, assembly };
    Source source = Source::synth;
    std::filesystem::path path;    // csv source
    std::filesystem::path asm_dir; // assembly source
    std::filesystem::path labels;  // assembly source
    int minority = 200;
    int majority = 800;
    int opcodes = 50;
    double separation = 0.9;
};

inline const char* dataset_source_token(DatasetConfig::Source s) {
    switch (s) {
        case DatasetConfig::Source::synth: return "synth";
        case DatasetConfig::Source::csv: return "csv";
        case DatasetConfig::Source::assembly: return "asm";
    }
    throw ConfigError("unknown dataset source");
}

struct ExperimentConfig {
    DatasetConfig dataset;
    GridConfig grid;
    std::string canonical;
    std::uint64_t hash = 0;
};

namespace detail {

struct IniEntry {
    std::string key, value;
    std::size_t line = 0;
    bool used = false;
};

struct IniFile {
    // section -> entries, in file order
    std::vector<std::pair<std::string, std::vector<IniEntry>>> sections;

    std::vector<IniEntry>* find(const std::string& name) {
        for (auto& [sec, entries] : sections)
            if (sec == name) return &entries;
        return nullptr;
    }
};

inline IniFile parse_ini(std::string_view text) {
    IniFile file;
    std::vector<IniEntry>* current = nullptr;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::string_view t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3)
                throw ConfigError("malformed section header '" + std::string(t) + "'", line_no);
            const std::string name(trim(t.substr(1, t.size() - 2)));
            if (file.find(name)) throw ConfigError("duplicate section [" + name + "]", line_no);
            file.sections.emplace_back(name, std::vector<IniEntry>{});
            current = &file.sections.back().second;
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("expected 'key = value', got '" + std::string(t) + "'", line_no);
        if (!current) throw ConfigError("key before any [section]", line_no);
        IniEntry e;
        e.key = std::string(trim(t.substr(0, eq)));
        e.value = std::string(trim(t.substr(eq + 1)));
        e.line = line_no;
        if (e.key.empty()) throw ConfigError("empty key", line_no);
        if (e.value.empty()) throw ConfigError("empty value for '" + e.key + "'", line_no);
        for (const auto& prev : *current)
            if (prev.key == e.key) throw ConfigError("duplicate key '" + e.key + "'", line_no);
        current->push_back(std::move(e));
    }
    return file;
}

class SectionReader {
public:
    SectionReader(IniFile& file, const std::string& name) : entries_(file.find(name)), name_(name) {}

    bool present() const { return entries_ != nullptr; }

    IniEntry* find(const std::string& key) {
        if (!entries_) return nullptr;
        for (auto& e : *entries_)
            if (e.key == key) {
                e.used = true;
                return &e;
            }
        return nullptr;
    }

    std::string str(const std::string& key, const std::string& fallback) {
        const auto* e = find(key);
        return e ? e->value : fallback;
    }

    long long integer(const std::string& key, long long fallback, long long lo, long long hi) {
        const auto* e = find(key);
        if (!e) return fallback;
        long long v;
        if (!parse_long(e->value, v))
            throw ConfigError("[" + name_ + "] " + key + ": not an integer: '" + e->value + "'", e->line);
        if (v < lo || v > hi)
            throw ConfigError("[" + name_ + "] " + key + ": " + std::to_string(v) + " is outside [" +
                                  std::to_string(lo) + ", " + std::to_string(hi) + "]",
                              e->line);
        return v;
    }

    std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) {
        const auto* e = find(key);
        if (!e) return fallback;
        std::uint64_t v;
        if (!parse_u64(e->value, v))
            throw ConfigError("[" + name_ + "] " + key + ": not an unsigned integer: '" + e->value + "'",
                              e->line);
        return v;
    }

    double real(const std::string& key, double fallback, double lo, double hi) {
        const auto* e = find(key);
        if (!e) return fallback;
        double v;
        if (!parse_double(e->value, v))
            throw ConfigError("[" + name_ + "] " + key + ": not a number: '" + e->value + "'", e->line);
        if (!(v >= lo && v <= hi))
            throw ConfigError("[" + name_ + "] " + key + ": " + e->value + " is outside [" +
                                  format_double(lo) + ", " + format_double(hi) + "]",
                              e->line);
        return v;
    }

    bool boolean(const std::string& key, bool fallback) {
        const auto* e = find(key);
        if (!e) return fallback;
        if (e->value == "true" || e->value == "1") return true;
        if (e->value == "false" || e->value == "0") return false;
        throw ConfigError("[" + name_ + "] " + key + ": expected true/false, got '" + e->value + "'",
                          e->line);
    }

private:
    std::vector<IniEntry>* entries_;
    std::string name_;
};

inline void train_section(SectionReader& sec, nn::TrainConfig& tc) {
    tc.epochs = static_cast<int>(sec.integer("epochs", tc.epochs, 0, 1000000));
    tc.batch_size = static_cast<int>(sec.integer("batch", tc.batch_size, 1, 1000000));
    tc.alpha = sec.real("lr", tc.alpha, 1e-12, 1.0);
    tc.validation_fraction = sec.real("val_fraction", tc.validation_fraction, 0.0, 0.999);
}

} // namespace detail

inline std::string build_canonical(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "source=" << dataset_source_token(cfg.dataset.source) << '\n';
    switch (cfg.dataset.source) {
        case DatasetConfig::Source::csv: os << "path=" << cfg.dataset.path.string() << '\n'; break;
        case DatasetConfig::Source::assembly:
            os << "asm_dir=" << cfg.dataset.asm_dir.string()
               << "\nlabels=" << cfg.dataset.labels.string() << '\n';
            break;
        case DatasetConfig::Source::synth:
            os << "minority=" << cfg.dataset.minority << "\nmajority=" << cfg.dataset.majority
               << "\nopcodes=" << cfg.dataset.opcodes
               << "\nseparation=" << format_double(cfg.dataset.separation) << '\n';
            break;
    }
    os << cfg.grid.canonical_string();
    return os.str();
}

inline void refresh_hash(ExperimentConfig& cfg) {
    cfg.canonical = build_canonical(cfg);
    cfg.hash = fnv1a64(cfg.canonical.data(), cfg.canonical.size());
}

inline ExperimentConfig parse_experiment_config(std::string_view text) {
    auto ini = detail::parse_ini(text);
    static const char* known[] = {"dataset", "experiment", "adasyn",
                                  "reduce",  "autoencoder", "dnn",    "forest"};
    for (const auto& [name, entries] : ini.sections) {
        bool ok = false;
        for (const auto* k : known) ok = ok || name == k;
        if (!ok)
            throw ConfigError("unknown section [" + name + "]",
                              entries.empty() ? 0 : entries.front().line);
    }

    ExperimentConfig cfg;

    detail::SectionReader dataset(ini, "dataset");
    const std::string source = dataset.str("source", "synth");
    if (source == "synth") {
        cfg.dataset.source = DatasetConfig::Source::synth;
    } else if (source == "csv") {
        cfg.dataset.source = DatasetConfig::Source::csv;
    } else if (source == "asm") {
        cfg.dataset.source = DatasetConfig::Source::assembly;
    } else {
        throw ConfigError("[dataset] source: expected synth, csv or asm, got '" + source + "'");
    }
    cfg.dataset.minority = static_cast<int>(dataset.integer("minority", cfg.dataset.minority, 1, 10000000));
    cfg.dataset.majority = static_cast<int>(dataset.integer("majority", cfg.dataset.majority, 1, 10000000));
    cfg.dataset.opcodes = static_cast<int>(dataset.integer("opcodes", cfg.dataset.opcodes, 2, 1000000));
    cfg.dataset.separation = dataset.real("separation", cfg.dataset.separation, 0.0, 1.0);
    cfg.dataset.path = std::filesystem::path(dataset.str("path", ""));
    cfg.dataset.asm_dir = std::filesystem::path(dataset.str("asm_dir", ""));
    cfg.dataset.labels = std::filesystem::path(dataset.str("labels", ""));
    if (cfg.dataset.source == DatasetConfig::Source::csv && cfg.dataset.path.empty())
        throw ConfigError("[dataset] path is required when source = csv");
    if (cfg.dataset.source == DatasetConfig::Source::assembly &&
        (cfg.dataset.asm_dir.empty() || cfg.dataset.labels.empty()))
        throw ConfigError("[dataset] asm_dir and labels are required when source = asm");

    detail::SectionReader experiment(ini, "experiment");
    {
        const std::string reducers = experiment.str("reducers", "none,vt,ae1,ae3");
        cfg.grid.reducers.clear();
        for (const auto part : split(reducers, ',')) {
            const ReducerKind k = reducer_from_token(trim(part));
            for (const auto prev : cfg.grid.reducers)
                if (prev == k) throw ConfigError("[experiment] reducers: duplicate '" + std::string(trim(part)) + "'");
            cfg.grid.reducers.push_back(k);
        }
        const std::string classifiers = experiment.str("classifiers", "rf,dnn2,dnn4,dnn7");
        cfg.grid.classifiers.clear();
        for (const auto part : split(classifiers, ',')) {
            const ClassifierKind k = classifier_from_token(trim(part));
            for (const auto prev : cfg.grid.classifiers)
                if (prev == k)
                    throw ConfigError("[experiment] classifiers: duplicate '" + std::string(trim(part)) + "'");
            cfg.grid.classifiers.push_back(k);
        }
    }
    cfg.grid.n_folds = static_cast<int>(experiment.integer("folds", cfg.grid.n_folds, 2, 1000));
    cfg.grid.stratified = experiment.boolean("stratified", cfg.grid.stratified);
    cfg.grid.master_seed = experiment.unsigned64("seed", cfg.grid.master_seed);
    cfg.grid.jobs = static_cast<int>(experiment.integer("jobs", cfg.grid.jobs, 0, 4096));

    detail::SectionReader adasyn(ini, "adasyn");
    cfg.grid.adasyn_k = static_cast<int>(adasyn.integer("k", cfg.grid.adasyn_k, 1, 1000000));
    cfg.grid.adasyn_beta = adasyn.real("beta", cfg.grid.adasyn_beta, 0.0, 1.0);

    detail::SectionReader reduce(ini, "reduce");
    cfg.grid.vt_threshold = reduce.real("vt_threshold", cfg.grid.vt_threshold, 0.0, 1e18);
    cfg.grid.bottleneck =
        static_cast<Eigen::Index>(reduce.integer("bottleneck", static_cast<long>(cfg.grid.bottleneck), 1, 1000000));

    detail::SectionReader autoencoder(ini, "autoencoder");
    detail::train_section(autoencoder, cfg.grid.ae_train);

    detail::SectionReader dnn(ini, "dnn");
    detail::train_section(dnn, cfg.grid.dnn_train);
    cfg.grid.dnn_dropout = dnn.real("dropout", cfg.grid.dnn_dropout, 0.0, 0.999);

    detail::SectionReader forest(ini, "forest");
    cfg.grid.forest.n_trees = static_cast<int>(forest.integer("trees", cfg.grid.forest.n_trees, 1, 100000));
    cfg.grid.forest.max_depth =
        static_cast<int>(forest.integer("max_depth", cfg.grid.forest.max_depth, 0, 1000000));
    cfg.grid.forest.min_samples_split =
        static_cast<int>(forest.integer("min_samples_split", cfg.grid.forest.min_samples_split, 2, 1000000));
    cfg.grid.forest.features_per_split =
        static_cast<int>(forest.integer("features_per_split", cfg.grid.forest.features_per_split, 0, 1000000));
    cfg.grid.forest.bootstrap = forest.boolean("bootstrap", cfg.grid.forest.bootstrap);

    for (const auto& [name, entries] : ini.sections)
        for (const auto& e : entries)
            if (!e.used) throw ConfigError("unknown key '" + e.key + "' in [" + name + "]", e.line);

    refresh_hash(cfg);
    return cfg;
}

// Parses and validates referenced input paths up front, so a bad config
// fails before any work starts.
inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg = parse_experiment_config(buf.str());
    namespace fs = std::filesystem;
    if (cfg.dataset.source == DatasetConfig::Source::csv && !fs::is_regular_file(cfg.dataset.path))
        throw ConfigError("[dataset] path '" + cfg.dataset.path.string() + "' does not exist");
    if (cfg.dataset.source == DatasetConfig::Source::assembly) {
        if (!fs::is_directory(cfg.dataset.asm_dir))
            throw ConfigError("[dataset] asm_dir '" + cfg.dataset.asm_dir.string() +
                              "' is not a directory");
        if (!fs::is_regular_file(cfg.dataset.labels))
            throw ConfigError("[dataset] labels '" + cfg.dataset.labels.string() +
                              "' does not exist");
    }
    return cfg;
}

} // namespace opclass
