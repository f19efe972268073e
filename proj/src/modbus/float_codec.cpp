#include "pmon/modbus/float_codec.hpp"

#include <bit>
#include <cmath>

#include <fmt/format.h>

namespace pmon::modbus {

DecodeError::DecodeError(Kind kind, std::uint32_t bits)
    : std::runtime_error(fmt::format("register pair 0x{:08X} decodes to {}", bits, kind == Kind::NaN ? "NaN" : "infinity")),
      kind_(kind), bits_(bits)
{
}

float f32_from_registers(std::uint16_t hi, std::uint16_t lo)
{
    const std::uint32_t bits = (static_cast<std::uint32_t>(hi) << 16) | lo;
    const float value = std::bit_cast<float>(bits);
    if (std::isnan(value))
        throw DecodeError(DecodeError::Kind::NaN, bits);
    if (std::isinf(value))
        throw DecodeError(DecodeError::Kind::Infinity, bits);
    return value;
}

std::pair<std::uint16_t, std::uint16_t> f32_to_registers(float value)
{
    if (!std::isfinite(value))
        throw std::invalid_argument("cannot encode non-finite value into registers");
    const auto bits = std::bit_cast<std::uint32_t>(value);
    return {static_cast<std::uint16_t>(bits >> 16), static_cast<std::uint16_t>(bits & 0xFFFF)};
}

} // namespace pmon::modbus
