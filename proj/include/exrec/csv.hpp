#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exrec::csv {

// Splits one line on commas. Double-quoted fields may contain commas and
// doubled quotes; a trailing '\r' is ignored.
std::vector<std::string> split_line(std::string_view line);

// Parses a full-field decimal number; nullopt when the field is not numeric.
std::optional<double> parse_double(std::string_view field);

// Shortest round-trip representation.
inline std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

// Quotes a field when it contains a separator or quote.
std::string escape(std::string_view field);

}  // namespace exrec::csv
