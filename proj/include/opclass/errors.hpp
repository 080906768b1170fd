#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opclass {

// Process exit codes shared by the library error types and the CLI.
enum ExitCode : int {
    exit_ok = 0,
    exit_config = 2,
    exit_data = 3,
    exit_numeric = 4,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    ConfigError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int exit_code() const noexcept override { return exit_config; }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return exit_data; }
};

class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return exit_numeric; }
};

struct NoInstructions : DataError {
    explicit NoInstructions(const std::string& file_id)
        : DataError("NoInstructions: no instruction lines parsed from '" + file_id + "'") {}
};

struct EmptyCorpus : DataError {
    EmptyCorpus() : DataError("EmptyCorpus: no opcode sequences supplied") {}
};

struct MissingLabel : DataError {
    explicit MissingLabel(const std::string& file_id)
        : DataError("MissingLabel: no label for file '" + file_id + "'") {}
};

struct DimensionMismatch : DataError {
    using DataError::DataError;
};

// Malformed on-disk input; carries the 1-based line (or record) number.
struct FormatViolation : DataError {
    FormatViolation(std::size_t line, const std::string& what)
        : DataError("FormatViolation at line " + std::to_string(line) + ": " + what),
          line_(line) {}
    explicit FormatViolation(const std::string& what)
        : DataError("FormatViolation: " + what) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

struct InsufficientRows : DataError {
    using DataError::DataError;
};

struct SingleClass : DataError {
    SingleClass() : DataError("SingleClass: dataset must contain both classes") {}
};

struct ShapeMismatch : DataError {
    using DataError::DataError;
};

struct EmptyFeatureSet : DataError {
    EmptyFeatureSet() : DataError("EmptyFeatureSet: variance threshold removed every column") {}
};

struct TooFewRows : DataError {
    using DataError::DataError;
};

struct LengthMismatch : DataError {
    using DataError::DataError;
};

struct NonFiniteLoss : NumericError {
    explicit NonFiniteLoss(int epoch)
        : NumericError("NonFiniteLoss: loss became non-finite at epoch " + std::to_string(epoch)),
          epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_ = 0;
};

} // namespace opclass
