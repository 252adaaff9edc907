#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace modbe::text {

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

/// Parses a full token as a double; throws InputError (anchored at `line`) otherwise.
double parse_double(std::string_view token, std::size_t line);
std::size_t parse_index(std::string_view token, std::size_t line);

std::vector<std::string_view> split_whitespace(std::string_view line);
std::vector<std::string_view> split(std::string_view line, char delimiter);
std::string_view trim(std::string_view s);

/// Reads whitespace-separated tokens line by line, skipping blank lines and
/// `#` comments, and remembers the line each token came from.
class TokenReader {
public:
    explicit TokenReader(std::istream& in);

    bool done();
    std::string_view peek();
    std::string next();
    double next_double();
    std::size_t next_index();
    std::size_t line() const noexcept { return line_; }

private:
    bool fill();

    std::istream& in_;
    std::string buffer_;
    std::vector<std::string_view> tokens_;
    std::size_t cursor_ = 0;
    std::size_t line_ = 0;
};

}  // namespace modbe::text
