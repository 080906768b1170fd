#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "opclass/errors.hpp"
#include "opclass/format.hpp"

namespace opclass {

// Ordered mnemonics extracted from one disassembled file.
struct OpcodeSequence {
    std::string file_id;
    std::vector<std::string> tokens; // lowercase, file order
};

// Fixed, lexicographically sorted universe of opcodes; defines feature columns.
struct MasterOpcodeList {
    std::vector<std::string> opcodes;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t size() const { return opcodes.size(); }

    static MasterOpcodeList from_sorted(std::vector<std::string> sorted) {
        MasterOpcodeList m;
        m.opcodes = std::move(sorted);
        m.index.reserve(m.opcodes.size());
        for (std::size_t j = 0; j < m.opcodes.size(); ++j) m.index.emplace(m.opcodes[j], j);
        return m;
    }
};

// Per-file opcode occurrence counts over the master-list columns.
struct FeatureVector {
    std::string file_id;
    std::vector<std::int64_t> counts;
};

namespace detail {

inline bool is_hex(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

// "<hex-address>:" with optional surrounding whitespace.
inline bool is_address_field(std::string_view f) {
    f = trim(f);
    if (f.size() < 2 || f.back() != ':') return false;
    f.remove_suffix(1);
    return !f.empty() && std::all_of(f.begin(), f.end(), is_hex);
}

// Hex byte dump, e.g. "55" or "8b 45 08".
inline bool is_byte_field(std::string_view f) {
    f = trim(f);
    if (f.empty()) return false;
    return std::all_of(f.begin(), f.end(), [](char c) { return is_hex(c) || c == ' '; });
}

inline bool is_mnemonic(std::string_view t) {
    if (t.empty() || t[0] < 'a' || t[0] > 'z') return false;
    return std::all_of(t.begin(), t.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.';
    });
}

} // namespace detail

// Parses a GNU-style disassembly listing. Instruction lines look like
//   8048400:<TAB>55<TAB>push   %ebp
// The token is the first whitespace-delimited word of the third tab field,
// lowercased. Anything else (section headers, symbol labels, byte
// continuations, junk mnemonics such as "(bad)") is skipped.
inline OpcodeSequence parse_disassembly(std::string_view listing_text, std::string file_id) {
    OpcodeSequence seq;
    seq.file_id = std::move(file_id);

    std::size_t pos = 0;
    while (pos <= listing_text.size()) {
        std::size_t eol = listing_text.find('\n', pos);
        if (eol == std::string_view::npos) eol = listing_text.size();
        std::string_view line = listing_text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        const std::size_t tab1 = line.find('\t');
        if (tab1 == std::string_view::npos) continue;
        const std::size_t tab2 = line.find('\t', tab1 + 1);
        if (tab2 == std::string_view::npos) continue;

        if (!detail::is_address_field(line.substr(0, tab1))) continue;
        if (!detail::is_byte_field(line.substr(tab1 + 1, tab2 - tab1 - 1))) continue;

        std::string_view rest = line.substr(tab2 + 1);
        const std::size_t start = rest.find_first_not_of(" \t");
        if (start == std::string_view::npos) continue;
        std::size_t end = rest.find_first_of(" \t", start);
        if (end == std::string_view::npos) end = rest.size();

        std::string token = to_lower_ascii(rest.substr(start, end - start));
        if (!detail::is_mnemonic(token)) continue;
        seq.tokens.push_back(std::move(token));
    }

    if (seq.tokens.empty()) throw NoInstructions(seq.file_id);
    return seq;
}

// Sorted union of all distinct tokens; order-independent by construction.
inline MasterOpcodeList build_master_list(const std::vector<OpcodeSequence>& sequences) {
    if (sequences.empty()) throw EmptyCorpus();
    std::set<std::string> uniq;
    for (const auto& s : sequences) uniq.insert(s.tokens.begin(), s.tokens.end());
    return MasterOpcodeList::from_sorted(std::vector<std::string>(uniq.begin(), uniq.end()));
}

// counts[j] = multiplicity of master.opcodes[j] in sequence.tokens. Tokens not
// in the master list are ignored and tallied into *dropped when provided.
inline FeatureVector histogram(const OpcodeSequence& sequence, const MasterOpcodeList& master,
                               std::size_t* dropped = nullptr) {
    FeatureVector fv;
    fv.file_id = sequence.file_id;
    fv.counts.assign(master.size(), 0);
    for (const auto& tok : sequence.tokens) {
        const auto it = master.index.find(tok);
        if (it == master.index.end()) {
            if (dropped) ++*dropped;
            continue;
        }
        ++fv.counts[it->second];
    }
    return fv;
}

} // namespace opclass
