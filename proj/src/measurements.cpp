#include "pmon/measurements.hpp"

#include <cmath>

namespace pmon {

float Measurements::get(MeasurementKind kind) const
{
    switch (kind) {
    case MeasurementKind::Voltage: return voltage;
    case MeasurementKind::Current: return current;
    case MeasurementKind::Frequency: return frequency;
    case MeasurementKind::PowerFactor: return power_factor;
    case MeasurementKind::ActivePower: return active_power;
    case MeasurementKind::Energy: return energy;
    }
    return 0;
}

void Measurements::set(MeasurementKind kind, float value)
{
    switch (kind) {
    case MeasurementKind::Voltage: voltage = value; break;
    case MeasurementKind::Current: current = value; break;
    case MeasurementKind::Frequency: frequency = value; break;
    case MeasurementKind::PowerFactor: power_factor = value; break;
    case MeasurementKind::ActivePower: active_power = value; break;
    case MeasurementKind::Energy: energy = value; break;
    }
}

bool Measurements::all_finite() const
{
    for (auto kind : kAllKinds)
        if (!std::isfinite(get(kind)))
            return false;
    return true;
}

} // namespace pmon
