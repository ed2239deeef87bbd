#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace labelforge {

/// UTC instant at second precision.
using Timestamp = std::chrono::sys_seconds;
/// UTC calendar day.
using Date = std::chrono::sys_days;

/// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS[Z]" and the space-separated
/// form VirusTotal v2 exports use ("YYYY-MM-DD HH:MM:SS").
/// Throws Error(InvalidTimestamp).
Timestamp parse_timestamp(std::string_view text);
Date parse_date(std::string_view text);

/// Canonical form: "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(Timestamp t);
/// "YYYY-MM-DD".
std::string format_date(Date d);

inline Date day_of(Timestamp t) { return std::chrono::floor<std::chrono::days>(t); }

/// Parses a window length such as "1y", "6m", "3m", "1m", "1w" or "45d".
/// Years are 365 days, months 30 days (6m and 3m use 182 and 91 days).
std::chrono::seconds parse_window(std::string_view text);

}  // namespace labelforge
