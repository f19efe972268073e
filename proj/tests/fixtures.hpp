#pragma once

#include "pmon/store/store.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace pmon::test {

// Three samples from 2026-01-15T10:00:00Z at one-second spacing. The values
// are the ones written out in golden/records_3row.json.
inline void write_three_row_store(store::Store& st, const std::string& device = "pm01")
{
    const std::int64_t t0 = 1768471200000; // 2026-01-15T10:00:00.000Z
    st.append(Sample{device, from_millis(t0), {220.0f, 14.0f, 50.0f, 0.85f, 2618.0f, 1.5f}});
    st.append(Sample{device, from_millis(t0 + 1000), {219.5f, 14.0f, 49.98f, 0.85f, 2612.05f, 1.5007f}});
    st.append(Sample{device, from_millis(t0 + 2000), {221.25f, 14.0f, 50.02f, 0.85f, 2632.9375f, 1.5015f}});
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f)
        return {};
    std::string out;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, f)) > 0;)
        out.append(buf, n);
    std::fclose(f);
    return out;
}

inline std::filesystem::path temp_path(const std::string& stem)
{
    return std::filesystem::temp_directory_path() / (stem + "-" + std::to_string(std::random_device{}()));
}

} // namespace pmon::test
