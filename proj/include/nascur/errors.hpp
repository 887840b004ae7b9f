#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace nascur {

// Domain error with a stable machine-readable kind. The CLI maps any
// Error to exit code 1 and prints kind + message verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

namespace errkind {
inline constexpr const char* malformed_layer = "MalformedLayer";
inline constexpr const char* parse_failure = "ParseFailure";
inline constexpr const char* invalid_range = "InvalidRange";
inline constexpr const char* incomplete_model = "IncompleteModel";
inline constexpr const char* unsupported_model = "UnsupportedModel";
inline constexpr const char* missing_input_shape = "MissingInputShape";
inline constexpr const char* ambiguous_shape = "AmbiguousShape";
inline constexpr const char* empty_dataset = "EmptyDataset";
inline constexpr const char* inconsistent_images = "InconsistentImages";
inline constexpr const char* no_channel_match = "NoChannelMatch";
inline constexpr const char* empty_candidates = "EmptyCandidates";
inline constexpr const char* shape_unadaptable = "ShapeUnadaptable";
inline constexpr const char* unsupported_dialect = "UnsupportedDialect";
inline constexpr const char* evaluator_failure = "EvaluatorFailure";
inline constexpr const char* budget_exceeded = "BudgetExceeded";
inline constexpr const char* bad_artifact = "BadArtifact";
}  // namespace errkind

}  // namespace nascur
