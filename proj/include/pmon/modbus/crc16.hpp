#pragma once

#include <cstdint>
#include <span>

namespace pmon::modbus {

// Modbus CRC-16: register preset 0xFFFF, reflected polynomial 0xA001.
// On the wire the low-order byte goes first.
struct Crc16 {
    std::uint16_t value = 0xFFFF;

    constexpr std::uint8_t lo() const { return static_cast<std::uint8_t>(value & 0xFF); }
    constexpr std::uint8_t hi() const { return static_cast<std::uint8_t>(value >> 8); }
    friend constexpr bool operator==(Crc16, Crc16) = default;
};

Crc16 crc16(std::span<const std::uint8_t> payload);

// True when the last two bytes of `frame` are the CRC of everything before them.
bool crc_ok(std::span<const std::uint8_t> frame);

} // namespace pmon::modbus
