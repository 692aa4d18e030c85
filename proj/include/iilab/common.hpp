#pragma once

#include <stdexcept>
#include <string>

namespace iilab {

// Bad inputs: malformed configs, malformed files, shape or precondition
// violations. Mapped to exit code 1 at the CLI boundary.
class InvalidInput : public std::runtime_error {
public:
    explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures while running: IO errors, non-finite losses, internal faults.
// Mapped to exit code 2 at the CLI boundary.
class RuntimeFailure : public std::runtime_error {
public:
    explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace iilab
