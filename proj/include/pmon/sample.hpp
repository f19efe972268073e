#pragma once

#include "pmon/measurements.hpp"
#include "pmon/time.hpp"

#include <string>
#include <variant>

namespace pmon {

// One complete six-quantity reading from one device.
struct Sample {
    std::string device;
    TimePoint ts;
    Measurements values;
    friend bool operator==(const Sample&, const Sample&) = default;
};

enum class GapReason : std::uint8_t { Timeout = 1, CrcError = 2, Exception = 3 };

// A poll cycle that produced no Sample.
struct GapEvent {
    std::string device;
    TimePoint ts;
    GapReason reason = GapReason::Timeout;
    std::uint8_t exception_code = 0; // for GapReason::Exception
    friend bool operator==(const GapEvent&, const GapEvent&) = default;
};

// "timeout", "crc_error", "exception_02"
std::string describe(const GapEvent& gap);

using Reading = std::variant<Sample, GapEvent>;

} // namespace pmon
