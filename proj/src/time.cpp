#include "pmon/time.hpp"

#include <charconv>
#include <ctime>

#include <fmt/format.h>

namespace pmon {

using namespace std::chrono;

TimePoint now_utc()
{
    return time_point_cast<milliseconds>(system_clock::now());
}

std::int64_t to_millis(TimePoint ts)
{
    return ts.time_since_epoch().count();
}

TimePoint from_millis(std::int64_t ms)
{
    return TimePoint{milliseconds{ms}};
}

std::string format_iso(TimePoint ts)
{
    const auto day = floor<days>(ts);
    const year_month_day ymd{day};
    const hh_mm_ss hms{ts - day};
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                       hms.minutes().count(), hms.seconds().count(), hms.subseconds().count());
}

namespace {

bool read_int(std::string_view& s, std::size_t width, int& out)
{
    if (s.size() < width)
        return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + width, out);
    if (ec != std::errc{} || p != s.data() + width)
        return false;
    s.remove_prefix(width);
    return true;
}

bool expect(std::string_view& s, char c)
{
    if (s.empty() || s.front() != c)
        return false;
    s.remove_prefix(1);
    return true;
}

} // namespace

std::optional<TimePoint> parse_time(std::string_view text)
{
    if (text.empty())
        return std::nullopt;
    {
        std::int64_t ms = 0;
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), ms);
        if (ec == std::errc{} && p == text.data() + text.size())
            return from_millis(ms);
    }
    std::string_view s = text;
    int y, mo, d, h, mi, sec, frac = 0;
    if (!read_int(s, 4, y) || !expect(s, '-') || !read_int(s, 2, mo) || !expect(s, '-') || !read_int(s, 2, d))
        return std::nullopt;
    if (!(expect(s, 'T') || expect(s, ' ')))
        return std::nullopt;
    if (!read_int(s, 2, h) || !expect(s, ':') || !read_int(s, 2, mi) || !expect(s, ':') || !read_int(s, 2, sec))
        return std::nullopt;
    if (!s.empty() && s.front() == '.') {
        s.remove_prefix(1);
        if (!read_int(s, 3, frac))
            return std::nullopt;
    }
    if (!s.empty() && s.front() == 'Z')
        s.remove_prefix(1);
    if (!s.empty())
        return std::nullopt;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 59)
        return std::nullopt;
    return TimePoint{sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + seconds{sec} + milliseconds{frac}};
}

} // namespace pmon
