#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tactip {

// Exit-code families used by the CLI: configuration problems map to 1,
// anything wrong with data on disk or in memory maps to 2.
enum class ErrorKind { parameter, data, format, training, script, io, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& what) : Error(ErrorKind::parameter, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Malformed file content. `offset` is the byte position where decoding failed.
struct FormatError : Error {
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(ErrorKind::format, what + " (at byte " + std::to_string(offset) + ")"), offset(offset) {}
    std::uint64_t offset;
};

/// Raised when SGD produces a non-finite loss.
struct TrainingError : Error {
    TrainingError(const std::string& what, int epoch)
        : Error(ErrorKind::training, what + " (epoch " + std::to_string(epoch) + ")"), epoch(epoch) {}
    int epoch;
};

struct ScriptError : Error {
    explicit ScriptError(const std::string& what) : Error(ErrorKind::script, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

struct InternalError : Error {
    explicit InternalError(const std::string& what) : Error(ErrorKind::internal, what) {}
};

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::parameter:
    case ErrorKind::script:
        return 1;
    default:
        return 2;
    }
}

} // namespace tactip
