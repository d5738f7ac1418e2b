#pragma once

#include <stdexcept>
#include <string>

namespace keyclink {

// Base class for all data/processing errors raised by the library.
// The CLI maps these to exit code 2; usage errors are handled by the
// argument parser (exit code 1).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace keyclink
