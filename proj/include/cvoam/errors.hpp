#pragma once

#include <stdexcept>
#include <string>

namespace cvoam {

enum class ErrKind {
    UnsupportedFormat,
    CorruptFile,
    MissingTier,
    MalformedTextGrid,
    MalformedCsv,
    NonMonotonicIntervals,
    DuplicateId,
    MissingFile,
    InvalidBand,
    ShapeMismatch,
    EmptyTrainingSet,
    InvalidClass,
    VersionMismatch,
    IndexOutOfRange,
    ZeroMean,
    ConstantInput,
    DegenerateInput,
    NoOverlap,
    InvalidArgument,
};

const char* to_string(ErrKind kind);

// Single exception type for all data/contract violations. The CLI maps these
// to exit code 2; anything else is an internal error (exit code 3).
class Error : public std::runtime_error {
  public:
    Error(ErrKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrKind kind() const { return kind_; }

  private:
    ErrKind kind_;
};

[[noreturn]] inline void fail(ErrKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace cvoam
