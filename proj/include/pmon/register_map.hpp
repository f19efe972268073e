#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace pmon {

enum class MeasurementKind : std::uint8_t {
    Voltage,
    Current,
    Frequency,
    PowerFactor,
    ActivePower,
    Energy,
};

inline constexpr std::size_t kMeasurementCount = 6;
inline constexpr std::array<MeasurementKind, kMeasurementCount> kAllKinds{
    MeasurementKind::Voltage,     MeasurementKind::Current,     MeasurementKind::Frequency,
    MeasurementKind::PowerFactor, MeasurementKind::ActivePower, MeasurementKind::Energy,
};

// Snake-case field name used in configs and JSON ("power_factor").
std::string_view name_of(MeasurementKind kind);
std::string_view unit_of(MeasurementKind kind);
std::optional<MeasurementKind> kind_from_name(std::string_view name);

// Start address of each two-register block, indexed by MeasurementKind.
class RegisterMap {
public:
    static constexpr std::uint16_t kBlockSize = 2;

    // Voltage 0x0000, Current 0x0002, ... Energy 0x000A.
    static RegisterMap contiguous();

    std::uint16_t start(MeasurementKind kind) const { return starts_[static_cast<std::size_t>(kind)]; }
    void set_start(MeasurementKind kind, std::uint16_t address) { starts_[static_cast<std::size_t>(kind)] = address; }

    // Blocks fit in the address space and do not overlap.
    bool valid() const;
    // Same layout as contiguous(), so one 12-register read covers everything.
    bool is_contiguous_default() const;
    // Kind whose block holds `address`, if any.
    std::optional<MeasurementKind> kind_at(std::uint16_t address) const;

    friend bool operator==(const RegisterMap&, const RegisterMap&) = default;

private:
    std::array<std::uint16_t, kMeasurementCount> starts_{};
};

} // namespace pmon
