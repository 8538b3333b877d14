#pragma once

#include <stdexcept>
#include <string>

namespace dapmm {

/// Bad argument to a public operation (nonpositive spread, odd grid size, ...).
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Input carries no usable mass, e.g. a density that is zero on every node.
struct DegenerateInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Output carries no usable mass, e.g. every predicted node value is <= 0.
struct DegenerateOutput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VersionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace dapmm
