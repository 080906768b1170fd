#pragma once

#include <filesystem>

#include "opclass/config.hpp"
#include "opclass/dataset.hpp"
#include "opclass/evaluate.hpp"
#include "opclass/extract.hpp"
#include "opclass/rng.hpp"

namespace opclass {

struct RunOutcome {
    LabeledDataset dataset;
    std::vector<std::string> master_opcodes; // assembly source only
    EvaluationReport report;
};

inline LabeledDataset materialize_dataset(const ExperimentConfig& cfg,
                                          std::vector<std::string>* master_opcodes = nullptr) {
    switch (cfg.dataset.source) {
        case DatasetConfig::Source::csv: return load_dataset(cfg.dataset.path);
        case DatasetConfig::Source::assembly: {
            auto extracted = extract_corpus(cfg.dataset.asm_dir, load_label_map(cfg.dataset.labels));
            if (master_opcodes) *master_opcodes = extracted.master.opcodes;
            return std::move(extracted.dataset);
        }
        case DatasetConfig::Source::synth:
            return synth_corpus(cfg.dataset.minority, cfg.dataset.majority, cfg.dataset.opcodes,
                                cfg.dataset.separation, derive_seed(cfg.grid.master_seed, "synth"));
    }
    throw ConfigError("unknown dataset source");
}

// Dataset -> balanced folds -> reducer grid -> classifier grid, stamped with
// the full-config hash so every artifact of one run carries the same identity.
inline RunOutcome run_pipeline(const ExperimentConfig& cfg) {
    RunOutcome out;
    out.dataset = materialize_dataset(cfg, &out.master_opcodes);
    out.report = run_experiment(out.dataset, cfg.grid);
    out.report.config_hash = cfg.hash;
    return out;
}

inline void write_run(const RunOutcome& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    persist_dataset(run.dataset, dir / "dataset.csv",
                    {"config_hash=" + hex64(run.report.config_hash),
                     "master_seed=" + std::to_string(run.report.config.master_seed)});
    if (!run.master_opcodes.empty()) {
        std::ofstream master(dir / "master.txt");
        if (!master) throw DataError("cannot open master.txt for writing");
        for (const auto& op : run.master_opcodes) master << op << '\n';
        master.close();
        if (!master) throw DataError("error writing master.txt");
    }
    write_report(run.report, dir);
}

} // namespace opclass
