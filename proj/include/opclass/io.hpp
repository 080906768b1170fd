#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opclass/errors.hpp"

namespace opclass {

// Little-endian binary writer for the OPCLASS-* model files.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::filesystem::path& path)
        : out_(path, std::ios::binary), path_(path.string()) {
        if (!out_) throw DataError("cannot open '" + path_ + "' for writing");
    }

    void magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

    void u8(std::uint8_t v) { raw(&v, 1); }

    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        raw(b, 8);
    }

    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }

    void str(std::string_view s) {
        u64(s.size());
        raw(s.data(), s.size());
    }

    // Row-major block, dimensions first.
    void matrix(const Eigen::MatrixXd& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }

    void close() {
        out_.close();
        if (!out_) throw DataError("error writing '" + path_ + "'");
    }

private:
    void raw(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }

    std::ofstream out_;
    std::string path_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::filesystem::path& path)
        : in_(path, std::ios::binary), path_(path.string()) {
        if (!in_) throw DataError("cannot open '" + path_ + "' for reading");
    }

    void expect_magic(std::string_view tag) {
        std::string got(tag.size(), '\0');
        raw(got.data(), got.size());
        if (got != tag)
            throw FormatViolation("'" + path_ + "': bad magic, expected " + std::string(tag));
    }

    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }

    std::uint64_t u64() {
        unsigned char b[8];
        raw(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }

    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string str(std::uint64_t max_len = 1u << 20) {
        const std::uint64_t n = u64();
        if (n > max_len) throw FormatViolation("'" + path_ + "': string length " + std::to_string(n) + " out of range");
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }

    Eigen::MatrixXd matrix(std::uint64_t max_elems = 1ull << 28) {
        const std::uint64_t r = u64();
        const std::uint64_t c = u64();
        if (r * c > max_elems)
            throw FormatViolation("'" + path_ + "': matrix " + std::to_string(r) + "x" + std::to_string(c) + " out of range");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
        return m;
    }

private:
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatViolation("'" + path_ + "': truncated file");
    }

    std::ifstream in_;
    std::string path_;
};

} // namespace opclass
