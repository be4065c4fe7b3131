#pragma once

#include <stdexcept>
#include <string>

namespace ttml {

// Base class for everything this library throws. The CLI maps subclasses
// onto its exit-code contract (2 usage, 3 data, 4 numeric).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched extents, axes out of range, rank overflow.
struct ShapeError : Error {
    using Error::Error;
};

// Math domain violations: log of a nonpositive value, zero-norm vectors,
// nonpositive temperature or wall time.
struct DomainError : Error {
    using Error::Error;
};

// Files, directories, malformed image containers, empty datasets,
// out-of-range labels.
struct DataError : Error {
    using Error::Error;
};

// Invalid flag combinations or config values.
struct UsageError : Error {
    using Error::Error;
};

}  // namespace ttml
