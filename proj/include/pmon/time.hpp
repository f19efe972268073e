#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pmon {

using TimePoint = std::chrono::sys_time<std::chrono::milliseconds>;

TimePoint now_utc();
std::int64_t to_millis(TimePoint ts);
TimePoint from_millis(std::int64_t ms);

// "2026-10-18T09:30:00.125Z"
std::string format_iso(TimePoint ts);
// Accepts the format_iso() form (fraction and trailing Z optional) or a
// plain integer of Unix milliseconds.
std::optional<TimePoint> parse_time(std::string_view text);

} // namespace pmon
