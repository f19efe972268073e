#pragma once

#include "pmon/measurements.hpp"
#include "pmon/modbus/frame.hpp"
#include "pmon/register_map.hpp"

#include <optional>
#include <random>
#include <string_view>

namespace pmon::sim {

inline constexpr double kNominalVoltage = 220.0;
inline constexpr double kVoltageTolerance = 0.06; // supply rule: 220 V +/- 6 %
inline constexpr double kNominalFrequency = 50.0;
inline constexpr double kFrequencySpread = 0.5;
inline constexpr double kVoltageStep = 0.5;      // max random-walk step per tick
inline constexpr double kFrequencyStep = 0.02;
inline constexpr double kSagLow = 0.80;
inline constexpr double kSagHigh = 0.90;

enum class FaultKind { FuseBlown, VoltageSag, PumpOff, Restore };

std::string_view name_of(FaultKind fault);
std::optional<FaultKind> fault_from_name(std::string_view name);

struct Band {
    double low;
    double high;
    bool contains(double v) const { return v >= low && v <= high; }
};

struct SimSettings {
    std::uint8_t unit = 1;
    std::uint64_t seed = 1;
    double power_factor = 0.85; // not given for the pump; configurable default
    double load_current = 14.0; // single-phase water pump
    double initial_energy = 0.0;
    double voltage_step = kVoltageStep; // 0 holds the voltage still
    RegisterMap register_map = RegisterMap::contiguous();
};

// Electrical state of one simulated single-phase analyser.
struct SimState {
    SimSettings settings;

    double voltage = kNominalVoltage;
    double current = 14.0;
    double frequency = kNominalFrequency;
    double power_factor = 0.85;
    double energy = 0.0; // kWh, never decreases
    bool fuse_intact = true;
    bool sagging = false;
    bool pump_on = true;
    std::uint64_t ticks = 0;
    std::mt19937_64 rng;

    explicit SimState(const SimSettings& s = {});

    Band voltage_band() const;
    double active_power() const { return voltage * current * power_factor; }
    // What the meter would put on the wire right now.
    Measurements readings() const;
};

// Advances the electrical state by `dt_seconds` (> 0).
SimState tick(SimState state, double dt_seconds);

SimState inject_fault(SimState state, FaultKind fault);

// Slave behaviour for one received frame. nullopt means the slave stays
// silent: bad CRC, another unit, or blown fuse.
std::optional<modbus::Bytes> handle_request(const SimState& state, std::span<const std::uint8_t> frame);

} // namespace pmon::sim
