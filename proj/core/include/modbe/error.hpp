#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace modbe {

/// Raised for malformed or inconsistent inputs: bad dimensions, probability
/// rows that do not sum to one, unparsable files. File readers set `line()`.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
    InputError(const std::string& what, std::size_t line)
        : std::invalid_argument("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

}  // namespace modbe
