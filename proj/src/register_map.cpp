#include "pmon/register_map.hpp"

namespace pmon {

std::string_view name_of(MeasurementKind kind)
{
    switch (kind) {
    case MeasurementKind::Voltage: return "voltage";
    case MeasurementKind::Current: return "current";
    case MeasurementKind::Frequency: return "frequency";
    case MeasurementKind::PowerFactor: return "power_factor";
    case MeasurementKind::ActivePower: return "active_power";
    case MeasurementKind::Energy: return "energy";
    }
    return "?";
}

std::string_view unit_of(MeasurementKind kind)
{
    switch (kind) {
    case MeasurementKind::Voltage: return "V";
    case MeasurementKind::Current: return "A";
    case MeasurementKind::Frequency: return "Hz";
    case MeasurementKind::PowerFactor: return "";
    case MeasurementKind::ActivePower: return "W";
    case MeasurementKind::Energy: return "kWh";
    }
    return "";
}

std::optional<MeasurementKind> kind_from_name(std::string_view name)
{
    for (auto kind : kAllKinds)
        if (name_of(kind) == name)
            return kind;
    return std::nullopt;
}

RegisterMap RegisterMap::contiguous()
{
    RegisterMap map;
    for (std::size_t i = 0; i < kMeasurementCount; ++i)
        map.starts_[i] = static_cast<std::uint16_t>(i * kBlockSize);
    return map;
}

bool RegisterMap::valid() const
{
    for (std::size_t i = 0; i < kMeasurementCount; ++i) {
        if (starts_[i] > 0xFFFF - (kBlockSize - 1))
            return false;
        for (std::size_t j = i + 1; j < kMeasurementCount; ++j) {
            const int a = starts_[i], b = starts_[j];
            if (a < b + kBlockSize && b < a + kBlockSize)
                return false;
        }
    }
    return true;
}

bool RegisterMap::is_contiguous_default() const
{
    return *this == contiguous();
}

std::optional<MeasurementKind> RegisterMap::kind_at(std::uint16_t address) const
{
    for (auto kind : kAllKinds) {
        const auto s = start(kind);
        if (address >= s && address < s + kBlockSize)
            return kind;
    }
    return std::nullopt;
}

} // namespace pmon
