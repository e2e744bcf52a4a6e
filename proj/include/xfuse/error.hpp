#pragma once

#include <stdexcept>
#include <string>

namespace xfuse {

/// Input violates a documented precondition or invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem or format failure while reading/writing artifacts.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Outcome flag for operations that fall back instead of throwing.
enum class Status { Ok, Warning };

}  // namespace xfuse
