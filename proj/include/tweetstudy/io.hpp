#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tweetstudy/types.hpp"

namespace tweetstudy {

/// Shortest round-trip decimal form of a double. Keeps serialized files
/// deterministic and lossless.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::optional<std::int64_t> parse_i64(std::string_view s) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<double> parse_f64(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

/// RFC-4180 style quoting: a field is quoted when it contains the
/// separator, a quote, or a newline; embedded quotes are doubled.
inline std::string csv_escape(std::string_view field, char sep = ',') {
    bool needs_quotes = false;
    for (char c : field)
        if (c == sep || c == '"' || c == '\n' || c == '\r') { needs_quotes = true; break; }
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

/// Splits one CSV record honoring quoted fields. Line numbers are only
/// used for error reporting.
inline std::vector<std::string> csv_split(std::string_view line, std::size_t line_no, char sep = ',') {
    std::vector<std::string> out;
    std::string field;
    bool in_quotes = false;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') { field += '"'; i += 2; continue; }
                in_quotes = false;
                ++i;
            } else {
                field += c;
                ++i;
            }
        } else if (c == '"' && field.empty()) {
            in_quotes = true;
            ++i;
        } else if (c == sep) {
            out.push_back(std::move(field));
            field.clear();
            ++i;
        } else {
            field += c;
            ++i;
        }
    }
    if (in_quotes) throw MalformedRow(line_no, "unterminated quoted field");
    out.push_back(std::move(field));
    return out;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open for reading: " + path);
    return in;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in = open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace tweetstudy
