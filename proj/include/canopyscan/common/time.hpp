#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace canopyscan {

using UtcTime = std::chrono::sys_time<std::chrono::milliseconds>;

/// Parses an RFC 3339 timestamp ("2024-06-21T17:00:00Z", optional fraction,
/// optional numeric offset). Throws ValidationError on malformed input.
UtcTime parse_rfc3339(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SSZ", with ".mmm" only when non-zero.
std::string format_rfc3339(UtcTime t);

UtcTime from_unix_millis(long long ms);
long long to_unix_millis(UtcTime t);

}  // namespace canopyscan
