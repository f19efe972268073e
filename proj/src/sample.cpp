#include "pmon/sample.hpp"

#include <fmt/format.h>

namespace pmon {

std::string describe(const GapEvent& gap)
{
    switch (gap.reason) {
    case GapReason::Timeout: return "timeout";
    case GapReason::CrcError: return "crc_error";
    case GapReason::Exception: return fmt::format("exception_{:02X}", gap.exception_code);
    }
    return "unknown";
}

} // namespace pmon
