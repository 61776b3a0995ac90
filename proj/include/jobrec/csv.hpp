#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace jobrec::csv {

/// Splits one comma-separated line. Double-quoted fields may contain commas;
/// a doubled quote inside a quoted field is a literal quote. Returns nullopt on
/// an unterminated quote.
std::optional<std::vector<std::string>> split(std::string_view line);

/// Quotes a field only when it contains a comma, quote, or newline.
std::string quote(std::string_view field);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

std::string_view trim(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

}  // namespace jobrec::csv
