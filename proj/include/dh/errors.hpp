#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dh {

// Bad caller input: shapes, ranges, non-finite values.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input is well-formed but the quantity is undefined on it (zero norm, underflow).
class DegenerateInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Operation called on an object that is not ready for it.
class InvalidState : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Malformed file. `offset` is the byte position where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          detail_(what),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }
    /// Message without the offset suffix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::uint64_t offset_;
};

// Two individually valid files disagree on a shared dimension.
class CrossFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dh
