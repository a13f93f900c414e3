#pragma once

#include <stdexcept>
#include <string>

namespace dwiboot {

/// Malformed or inconsistent input data (files, schemes, dimensions).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical degeneracy: the requested fit is not well posed
/// (leverage reaches 1, underdetermined system, singular normal matrix).
class DegeneracyError : public std::runtime_error {
public:
    explicit DegeneracyError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dwiboot
