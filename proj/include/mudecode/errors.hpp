#pragma once

#include <stdexcept>
#include <string>

namespace mudecode {

// Bad input data, malformed files or violated preconditions. The CLI maps
// these to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Failures while running a stage (divergent integration, I/O errors, ...).
// The CLI maps these to exit code 2.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mudecode
