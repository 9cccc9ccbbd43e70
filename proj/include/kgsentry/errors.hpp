#pragma once
// Error types shared across the toolkit. All derive from std::runtime_error
// so callers can catch broadly at the CLI boundary and precisely in tests.

#include <stdexcept>
#include <string>

namespace kgs {

// Entity label re-interned with a different entity type.
struct TypeConflict : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An EntityId/RelationId that is not valid in the store it was used with.
struct UnknownId : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Negative sampling exhausted its retry budget without finding an
// absent triple (dense or degenerate graphs).
struct Saturated : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input line; carries the 1-based line number.
struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_no, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
          line(line_no) {}
};

// Data lines encountered before the format header, or a required column
// is missing from the header.
struct MissingHeader : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Access mode outside {read, write}.
struct BadMode : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Scoring-time label is unseen and its entity type has no surrogate.
struct NoSurrogate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint dictionary hash does not match the store it is loaded against.
struct DictMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Id outside the bounds of the model parameters.
struct OutOfBounds : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Statistic undefined on the given input (e.g. a single severity label).
struct Degenerate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownScenario : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace kgs
