#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace fmr {

// Input that fails to parse (malformed file, bad header, ...).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally invalid input (bad mesh, mismatched sizes, bad flags).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure (eigensolver non-convergence, singular systems).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem-level failure.
struct IOError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shortest round-trippable decimal form for a double (17 significant digits).
inline std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace fmr
