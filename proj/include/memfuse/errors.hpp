#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace memfuse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible for the requested operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A softmax row (or pooled sequence) has no valid position.
class DegenerateRowError : public Error {
public:
    using Error::Error;
};

/// Misuse of a gradient tape (non-scalar loss, double backward, detached graph).
class TapeError : public Error {
public:
    using Error::Error;
};

/// A value is outside its documented domain.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Configuration failed validation. Carries every violation found.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "validation failed";
        for (const auto& s : v) {
            out += "; ";
            out += s;
        }
        return out;
    }
    std::vector<std::string> violations_;
};

/// A statistic is undefined for the given data (e.g. correlation of a constant series).
class UndefinedStatisticError : public Error {
public:
    using Error::Error;
};

/// Binary or text input does not follow its file format.
class FormatError : public Error {
public:
    using Error::Error;
};

class TruncationError : public FormatError {
public:
    using FormatError::FormatError;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// A checkpoint does not match the configuration it is being loaded against.
class ConfigMismatchError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch, int batch)
        : Error(what), epoch_(epoch), batch_(batch) {}
    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

/// Missing file or unreadable path.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace memfuse
