#pragma once

#include "pmon/register_map.hpp"

#include <array>

namespace pmon {

// The six quantities a power analyser reports, exactly as carried on the
// wire (IEEE-754 binary32).
struct Measurements {
    float voltage = 0;      // V
    float current = 0;      // A
    float frequency = 0;    // Hz
    float power_factor = 0; // dimensionless
    float active_power = 0; // W
    float energy = 0;       // kWh

    float get(MeasurementKind kind) const;
    void set(MeasurementKind kind, float value);
    bool all_finite() const;
    friend bool operator==(const Measurements&, const Measurements&) = default;
};

} // namespace pmon
