#include "modbe/text.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "modbe/error.hpp"

namespace modbe::text {

std::string format_double(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

double parse_double(std::string_view token, std::size_t line) {
    if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
    if (token == "-inf") return -std::numeric_limits<double>::infinity();
    double value = 0.0;
    const char* first = token.data();
    if (!token.empty() && token.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size() || std::isnan(value)) {
        throw InputError("expected a number, got '" + std::string(token) + "'", line);
    }
    return value;
}

std::size_t parse_index(std::string_view token, std::size_t line) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
        throw InputError("expected a non-negative integer, got '" + std::string(token) + "'", line);
    }
    return value;
}

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(delimiter, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

TokenReader::TokenReader(std::istream& in) : in_(in) {}

bool TokenReader::fill() {
    while (cursor_ >= tokens_.size()) {
        if (!std::getline(in_, buffer_)) return false;
        ++line_;
        std::string_view view(buffer_);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        tokens_ = split_whitespace(view);
        cursor_ = 0;
    }
    return true;
}

bool TokenReader::done() { return !fill(); }

std::string_view TokenReader::peek() {
    if (!fill()) throw InputError("unexpected end of input", line_);
    return tokens_[cursor_];
}

std::string TokenReader::next() {
    if (!fill()) throw InputError("unexpected end of input", line_);
    return std::string(tokens_[cursor_++]);
}

double TokenReader::next_double() {
    if (!fill()) throw InputError("unexpected end of input", line_);
    return parse_double(tokens_[cursor_++], line_);
}

std::size_t TokenReader::next_index() {
    if (!fill()) throw InputError("unexpected end of input", line_);
    return parse_index(tokens_[cursor_++], line_);
}

}  // namespace modbe::text
