#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace itm {

enum class ErrorCode {
    // bundle
    MissingFile,
    MagicMismatch,
    DimMismatch,
    NonFiniteValue,
    UnknownTag,
    DuplicateId,
    EmptyBundle,
    MalformedRecord,
    ZeroNormEmbedding,
    IoError,
    InvalidSpec,
    // reduce
    InvalidConfig,
    RankDeficient,
    MissingPrecomputed,
    // cluster
    TooFewPoints,
    SingleCluster,
    // topics
    EmptyTopic,
    TooFewDocuments,
    // descriptors
    WordNotInVocabulary,
    EmptyCandidatePool,
    // privnet
    UnlabeledRow,
    NonFiniteLoss,
    DimensionMismatch,
    EmptyTestSet,
    SchemaVersionMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. `code()` is stable and machine-readable;
/// `what()` carries the human detail.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// An Error re-raised by the pipeline with the stage it came from.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause)
        : Error(cause.code(), cause.what()), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace itm
