#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "opclass/dataset.hpp"
#include "opclass/disasm.hpp"
#include "opclass/errors.hpp"
#include "opclass/format.hpp"

namespace opclass {

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// file_id,label rows; an optional "file_id,label" header is tolerated.
inline std::map<std::string, int> load_label_map(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    std::map<std::string, int> labels;
    std::size_t line_no = 0;
    for (const auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto parts = split(line, ',');
        if (parts.size() != 2) throw FormatViolation(line_no, "expected 'file_id,label'");
        const auto id = trim(parts[0]);
        const auto value = trim(parts[1]);
        if (line_no == 1 && id == "file_id") continue;
        long long label = 0;
        if (!parse_long(value, label) || (label != 0 && label != 1))
            throw FormatViolation(line_no, "label must be 0 or 1, got '" + std::string(value) + "'");
        if (!labels.emplace(std::string(id), static_cast<int>(label)).second)
            throw FormatViolation(line_no, "duplicate file_id '" + std::string(id) + "'");
    }
    if (labels.empty()) throw DataError("label file '" + path.string() + "' has no rows");
    return labels;
}

struct ExtractResult {
    LabeledDataset dataset;
    MasterOpcodeList master;
    std::vector<std::string> skipped; // files with zero parsed instructions
};

// Walks the listing directory in sorted order; file stem = file_id. Files
// yielding no instructions are skipped and reported, not fatal.
inline ExtractResult extract_corpus(const std::filesystem::path& asm_dir,
                                    const std::map<std::string, int>& labels) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(asm_dir))
        throw DataError("'" + asm_dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(asm_dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    ExtractResult result;
    std::vector<OpcodeSequence> sequences;
    for (const auto& file : files) {
        try {
            sequences.push_back(parse_disassembly(read_text_file(file), file.stem().string()));
        } catch (const NoInstructions&) {
            result.skipped.push_back(file.string());
        }
    }
    result.master = build_master_list(sequences);
    std::vector<FeatureVector> vectors;
    vectors.reserve(sequences.size());
    for (const auto& seq : sequences) vectors.push_back(histogram(seq, result.master));
    result.dataset = assemble(vectors, labels, result.master);
    return result;
}

} // namespace opclass
