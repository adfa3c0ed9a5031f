#pragma once
#include <stdexcept>
#include <string>

namespace gazetime {

/// Rejected inputs: violated preconditions, malformed files, schema
/// mismatches. The CLI maps this to exit code 2.
struct ValidationError : std::invalid_argument {
    explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numerical failure: divergent fit, non-finite loss, impossible solve.
/// The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gazetime
