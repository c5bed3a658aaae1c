#pragma once

#include <stdexcept>
#include <string>

namespace esdlab {

/// Bad configuration, expression or argument. CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& m) : std::runtime_error(m) {}
};

/// Numerical failure: bracket not found, state left its invariant region,
/// non-finite values. CLI exit code 2.
class NumericsError : public std::runtime_error {
public:
    explicit NumericsError(const std::string& m) : std::runtime_error(m) {}
};

/// Filesystem failure. CLI exit code 3.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

} // namespace esdlab
