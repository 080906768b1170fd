#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opclass/disasm.hpp"
#include "opclass/errors.hpp"
#include "opclass/format.hpp"
#include "opclass/rng.hpp"

namespace opclass {

// Dense feature matrix (rows = files, columns = master-list opcodes) with
// binary labels: 1 = malware (the positive class), 0 = benign.
struct LabeledDataset {
    Eigen::MatrixXd matrix;
    std::vector<int> labels;
    std::vector<std::string> column_names;
    std::vector<std::string> row_ids;

    Eigen::Index rows() const { return matrix.rows(); }
    Eigen::Index cols() const { return matrix.cols(); }

    bool operator==(const LabeledDataset& o) const {
        return labels == o.labels && column_names == o.column_names && row_ids == o.row_ids &&
               matrix.rows() == o.matrix.rows() && matrix.cols() == o.matrix.cols() &&
               (matrix.size() == 0 || (matrix.array() == o.matrix.array()).all());
    }
};

inline LabeledDataset assemble(const std::vector<FeatureVector>& vectors,
                               const std::map<std::string, int>& labels,
                               const MasterOpcodeList& master) {
    LabeledDataset ds;
    ds.column_names = master.opcodes;
    ds.matrix.resize(static_cast<Eigen::Index>(vectors.size()),
                     static_cast<Eigen::Index>(master.size()));
    ds.labels.reserve(vectors.size());
    ds.row_ids.reserve(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const auto& v = vectors[i];
        if (v.counts.size() != master.size())
            throw DimensionMismatch("DimensionMismatch: vector '" + v.file_id + "' has " +
                                    std::to_string(v.counts.size()) + " counts, master list has " +
                                    std::to_string(master.size()));
        const auto it = labels.find(v.file_id);
        if (it == labels.end()) throw MissingLabel(v.file_id);
        for (std::size_t j = 0; j < v.counts.size(); ++j)
            ds.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                static_cast<double>(v.counts[j]);
        ds.labels.push_back(it->second);
        ds.row_ids.push_back(v.file_id);
    }
    return ds;
}

inline LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
    LabeledDataset out;
    out.column_names = ds.column_names;
    out.matrix.resize(static_cast<Eigen::Index>(rows.size()), ds.cols());
    out.labels.reserve(rows.size());
    out.row_ids.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.matrix.row(static_cast<Eigen::Index>(i)) = ds.matrix.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(ds.labels[rows[i]]);
        out.row_ids.push_back(ds.row_ids[rows[i]]);
    }
    return out;
}

namespace detail {

inline void check_csv_token(const std::string& s, const char* what) {
    if (s.empty()) throw DataError(std::string(what) + " must not be empty");
    if (s.find_first_of(",\"\r\n") != std::string::npos)
        throw DataError(std::string(what) + " '" + s + "' contains a character not allowed in CSV");
    if (s[0] == '#') throw DataError(std::string(what) + " '" + s + "' must not start with '#'");
}

} // namespace detail

// CSV with header `row_id,label,<opcode_1>,...,<opcode_N>`. Numbers are written
// in shortest round-trip form, so load(persist(d)) == d exactly. Lines starting
// with '#' before the header carry run metadata and are skipped on load.
inline void persist_dataset(const LabeledDataset& ds, const std::filesystem::path& path,
                            const std::vector<std::string>& header_comments = {}) {
    if (ds.matrix.cols() != static_cast<Eigen::Index>(ds.column_names.size()) ||
        ds.matrix.rows() != static_cast<Eigen::Index>(ds.labels.size()) ||
        ds.matrix.rows() != static_cast<Eigen::Index>(ds.row_ids.size()))
        throw DimensionMismatch("DimensionMismatch: inconsistent dataset shape");

    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    for (const auto& c : header_comments) out << "# " << c << "\n";
    out << "row_id,label";
    for (const auto& name : ds.column_names) {
        detail::check_csv_token(name, "column name");
        out << ',' << name;
    }
    out << '\n';
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        detail::check_csv_token(ds.row_ids[static_cast<std::size_t>(i)], "row id");
        if (ds.labels[static_cast<std::size_t>(i)] != 0 && ds.labels[static_cast<std::size_t>(i)] != 1)
            throw DataError("label for row '" + ds.row_ids[static_cast<std::size_t>(i)] + "' is not 0 or 1");
        out << ds.row_ids[static_cast<std::size_t>(i)] << ',' << ds.labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < ds.cols(); ++j) out << ',' << format_double(ds.matrix(i, j));
        out << '\n';
    }
    out.close();
    if (!out) throw DataError("error writing '" + path.string() + "'");
}

inline LabeledDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "' for reading");

    std::string line;
    std::size_t line_no = 0;

    // Header, preceded by optional comment lines.
    std::vector<std::string_view> header;
    std::string header_line;
    for (;;) {
        if (!std::getline(in, line)) throw FormatViolation(line_no, "missing header");
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] == '#') continue;
        header_line = line;
        header = split(header_line, ',');
        break;
    }
    if (header.size() < 3 || header[0] != "row_id" || header[1] != "label")
        throw FormatViolation(line_no, "header must start with 'row_id,label' and name at least one opcode column");

    LabeledDataset ds;
    ds.column_names.assign(header.begin() + 2, header.end());
    const std::size_t ncols = ds.column_names.size();

    std::vector<double> values;
    std::size_t nrows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != ncols + 2)
            throw FormatViolation(line_no, "expected " + std::to_string(ncols + 2) + " fields, got " +
                                               std::to_string(fields.size()));
        if (fields[0].empty()) throw FormatViolation(line_no, "empty row_id");
        if (fields[1] == "0")
            ds.labels.push_back(0);
        else if (fields[1] == "1")
            ds.labels.push_back(1);
        else
            throw FormatViolation(line_no, "label must be 0 or 1, got '" + std::string(fields[1]) + "'");
        ds.row_ids.emplace_back(fields[0]);
        for (std::size_t j = 0; j < ncols; ++j) {
            double v;
            if (!parse_double(fields[j + 2], v))
                throw FormatViolation(line_no, "bad numeric value '" + std::string(fields[j + 2]) + "'");
            values.push_back(v);
        }
        ++nrows;
    }

    ds.matrix.resize(static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(ncols));
    for (std::size_t i = 0; i < nrows; ++i)
        for (std::size_t j = 0; j < ncols; ++j)
            ds.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * ncols + j];
    return ds;
}

namespace detail {

inline std::string padded_number(std::size_t v, std::size_t width) {
    std::string s = std::to_string(v);
    if (s.size() < width) s.insert(0, width - s.size(), '0');
    return s;
}

} // namespace detail

constexpr int kSynthRowTokens = 500; // tokens per synthetic file

// Synthetic desk-scale corpus: every row is a 500-token multinomial draw.
// The two class profiles are (1-s)*uniform + s*block, where the blocks are
// disjoint halves of the opcode range, so their total-variation distance is
// exactly `separation`. Minority rows are benign (0), majority malware (1).
inline LabeledDataset synth_corpus(int n_minority, int n_majority, int n_opcodes,
                                   double separation, std::uint64_t seed) {
    if (n_minority < 1 || n_majority < 1)
        throw ConfigError("synth_corpus: class sizes must be >= 1");
    if (n_opcodes < 2) throw ConfigError("synth_corpus: need at least 2 opcodes");
    if (separation < 0.0 || separation > 1.0)
        throw ConfigError("synth_corpus: separation must be in [0, 1]");

    const std::size_t p = static_cast<std::size_t>(n_opcodes);
    const std::size_t half = (p + 1) / 2;
    std::vector<double> cum_minority(p), cum_majority(p);
    {
        const double u = 1.0 / static_cast<double>(p);
        double acc0 = 0.0, acc1 = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double a = j < half ? 1.0 / static_cast<double>(half) : 0.0;
            const double b = j < half ? 0.0 : 1.0 / static_cast<double>(p - half);
            acc0 += (1.0 - separation) * u + separation * a;
            acc1 += (1.0 - separation) * u + separation * b;
            cum_minority[j] = acc0;
            cum_majority[j] = acc1;
        }
        cum_minority[p - 1] = cum_majority[p - 1] = 1.0;
    }

    const std::size_t n = static_cast<std::size_t>(n_minority) + static_cast<std::size_t>(n_majority);
    LabeledDataset ds;
    ds.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    ds.labels.reserve(n);
    ds.row_ids.reserve(n);
    const std::size_t name_width = std::max<std::size_t>(3, std::to_string(p - 1).size());
    for (std::size_t j = 0; j < p; ++j)
        ds.column_names.push_back("op" + detail::padded_number(j, name_width));

    SplitRng rng(seed);
    auto draw_row = [&](Eigen::Index row, const std::vector<double>& cum) {
        for (int t = 0; t < kSynthRowTokens; ++t) {
            const double u = rng.uniform01();
            const auto it = std::lower_bound(cum.begin(), cum.end(), u);
            const auto j = static_cast<Eigen::Index>(it == cum.end() ? p - 1 : static_cast<std::size_t>(it - cum.begin()));
            ds.matrix(row, j) += 1.0;
        }
    };

    Eigen::Index row = 0;
    for (int i = 0; i < n_minority; ++i, ++row) {
        draw_row(row, cum_minority);
        ds.labels.push_back(0);
        ds.row_ids.push_back("benign_" + detail::padded_number(static_cast<std::size_t>(i), 5));
    }
    for (int i = 0; i < n_majority; ++i, ++row) {
        draw_row(row, cum_majority);
        ds.labels.push_back(1);
        ds.row_ids.push_back("malware_" + detail::padded_number(static_cast<std::size_t>(i), 5));
    }
    return ds;
}

} // namespace opclass
