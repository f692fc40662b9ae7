#pragma once

#include <stdexcept>
#include <string>

namespace vibfault {

// Bad arguments, malformed content, contract violations. CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem-level failures: missing files, unwritable paths. CLI exit code 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace vibfault
