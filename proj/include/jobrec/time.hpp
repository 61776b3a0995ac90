#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace jobrec {

using Timestamp = std::chrono::sys_seconds;

/// Parses `YYYY-MM-DDTHH:MM:SSZ` (UTC) or a bare `YYYY-MM-DD` (midnight UTC).
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_timestamp(Timestamp ts);

/// Signed age of `ts` relative to `reference`, in fractional days.
double age_days(Timestamp reference, Timestamp ts);

}  // namespace jobrec
