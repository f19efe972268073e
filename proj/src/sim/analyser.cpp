#include "pmon/sim/analyser.hpp"

#include "pmon/modbus/float_codec.hpp"

#include <algorithm>
#include <array>

namespace pmon::sim {

namespace {

const Band kNormalBand{kNominalVoltage * (1 - kVoltageTolerance), kNominalVoltage * (1 + kVoltageTolerance)};
const Band kSagBand{kNominalVoltage * kSagLow, kNominalVoltage * kSagHigh};
const Band kFrequencyBand{kNominalFrequency - kFrequencySpread, kNominalFrequency + kFrequencySpread};

// Bounded random walk, reflected at the band edges.
double walk(double value, double step_limit, const Band& band, std::mt19937_64& rng)
{
    if (step_limit <= 0)
        return std::clamp(value, band.low, band.high);
    std::uniform_real_distribution<double> step(-step_limit, step_limit);
    double v = value + step(rng);
    if (v > band.high)
        v = 2 * band.high - v;
    if (v < band.low)
        v = 2 * band.low - v;
    return std::clamp(v, band.low, band.high);
}

// Keeps the relative position inside the band when the band moves.
double remap(double v, const Band& from, const Band& to)
{
    const double t = std::clamp((v - from.low) / (from.high - from.low), 0.0, 1.0);
    return to.low + t * (to.high - to.low);
}

} // namespace

std::string_view name_of(FaultKind fault)
{
    switch (fault) {
    case FaultKind::FuseBlown: return "fuse_blown";
    case FaultKind::VoltageSag: return "voltage_sag";
    case FaultKind::PumpOff: return "pump_off";
    case FaultKind::Restore: return "restore";
    }
    return "?";
}

std::optional<FaultKind> fault_from_name(std::string_view name)
{
    for (auto f : {FaultKind::FuseBlown, FaultKind::VoltageSag, FaultKind::PumpOff, FaultKind::Restore})
        if (name_of(f) == name)
            return f;
    return std::nullopt;
}

SimState::SimState(const SimSettings& s)
    : settings(s), current(s.load_current), power_factor(s.power_factor), energy(s.initial_energy), rng(s.seed)
{
}

Band SimState::voltage_band() const
{
    return sagging ? kSagBand : kNormalBand;
}

Measurements SimState::readings() const
{
    Measurements m;
    m.voltage = static_cast<float>(voltage);
    m.current = static_cast<float>(current);
    m.frequency = static_cast<float>(frequency);
    m.power_factor = static_cast<float>(power_factor);
    m.active_power = static_cast<float>(active_power());
    m.energy = static_cast<float>(energy);
    return m;
}

SimState tick(SimState state, double dt_seconds)
{
    if (!(dt_seconds > 0))
        return state;
    state.voltage = walk(state.voltage, state.settings.voltage_step, state.voltage_band(), state.rng);
    state.frequency = walk(state.frequency, kFrequencyStep, kFrequencyBand, state.rng);
    state.current = state.pump_on ? state.settings.load_current : 0.0;
    // A meter without supply accumulates nothing.
    if (state.fuse_intact)
        state.energy += state.active_power() * dt_seconds / 3.6e6;
    ++state.ticks;
    return state;
}

SimState inject_fault(SimState state, FaultKind fault)
{
    switch (fault) {
    case FaultKind::FuseBlown:
        state.fuse_intact = false;
        break;
    case FaultKind::VoltageSag:
        if (!state.sagging) {
            state.voltage = remap(state.voltage, kNormalBand, kSagBand);
            state.sagging = true;
        }
        break;
    case FaultKind::PumpOff:
        state.pump_on = false;
        state.current = 0.0;
        break;
    case FaultKind::Restore:
        if (state.sagging)
            state.voltage = remap(state.voltage, kSagBand, kNormalBand);
        state.sagging = false;
        state.fuse_intact = true;
        state.pump_on = true;
        state.current = state.settings.load_current;
        break;
    }
    return state;
}

std::optional<modbus::Bytes> handle_request(const SimState& state, std::span<const std::uint8_t> frame)
{
    using modbus::ExceptionCode;
    using modbus::FrameErrc;

    if (!state.fuse_intact)
        return std::nullopt;

    const auto unit = state.settings.unit;
    modbus::ReadRequest req;
    try {
        req = modbus::decode_request(frame);
    } catch (const modbus::FrameError& e) {
        if (e.errc() == FrameErrc::ShortFrame || e.errc() == FrameErrc::CrcMismatch || e.unit() != unit)
            return std::nullopt;
        const auto code = e.errc() == FrameErrc::UnsupportedFunction ? ExceptionCode::IllegalFunction
                                                                     : ExceptionCode::IllegalDataValue;
        return modbus::encode_exception({unit, frame[1], code});
    }
    if (req.unit != unit)
        return std::nullopt;

    const auto& map = state.settings.register_map;
    const auto values = state.readings();
    std::vector<std::uint16_t> words(req.count);
    for (std::uint16_t i = 0; i < req.count; ++i) {
        const auto address = static_cast<std::uint16_t>(req.start + i);
        const auto kind = map.kind_at(address);
        if (!kind)
            return modbus::encode_exception({unit, modbus::kReadInputRegisters, ExceptionCode::IllegalDataAddress});
        const auto [hi, lo] = modbus::f32_to_registers(values.get(*kind));
        words[i] = address == map.start(*kind) ? hi : lo;
    }
    return modbus::encode_read_response(unit, words);
}

} // namespace pmon::sim
