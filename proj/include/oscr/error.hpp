#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oscr {

enum class Errc {
    ParseError,        // malformed JSON or binary input
    SchemaError,       // well-formed input with missing/unknown/mistyped fields
    ValidationFailed,  // layout or config violates an invariant
    DegeneratePose,
    OffscreenBox,
    DimensionMismatch,
    SpanOverlap,
    MissingMask,
    NoAppearanceTokens,
    NoPairs,
    EmptyManifest,
    BudgetExhausted,
    Io,
    Timeout,
};

std::string_view to_string(Errc code) noexcept;

/// Single exception type for the toolkit; the code decides how callers
/// (CLI exit status, HTTP status) classify it.
class Error : public std::runtime_error {
public:
    Error(Errc code, std::string const& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

    /// True when the failure is caused by the caller's input rather than the
    /// environment (I/O, timeouts, exhausted budgets).
    bool is_input_error() const noexcept;

private:
    Errc code_;
};

}  // namespace oscr
