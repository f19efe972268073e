#include "pmon/log.hpp"

#include "pmon/time.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace pmon::log {

namespace {
std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;

const char* tag(Level l)
{
    switch (l) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    case Level::Off: break;
    }
    return "";
}
} // namespace

void set_level(Level level)
{
    g_level = level;
}

Level level()
{
    return g_level;
}

void write(Level l, std::string_view message)
{
    const auto line = fmt::format("{} level={} {}\n", format_iso(now_utc()), tag(l), message);
    std::lock_guard lock(g_mutex);
    std::fputs(line.c_str(), stderr);
}

} // namespace pmon::log
