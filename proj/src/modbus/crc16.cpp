#include "pmon/modbus/crc16.hpp"

#include <array>

namespace pmon::modbus {

namespace {

constexpr std::array<std::uint16_t, 256> make_table()
{
    std::array<std::uint16_t, 256> table{};
    for (std::uint16_t i = 0; i < 256; ++i) {
        std::uint16_t crc = i;
        for (int bit = 0; bit < 8; ++bit)
            crc = (crc & 1) ? static_cast<std::uint16_t>((crc >> 1) ^ 0xA001) : static_cast<std::uint16_t>(crc >> 1);
        table[i] = crc;
    }
    return table;
}

constexpr auto kTable = make_table();

} // namespace

Crc16 crc16(std::span<const std::uint8_t> payload)
{
    std::uint16_t crc = 0xFFFF;
    for (std::uint8_t byte : payload)
        crc = static_cast<std::uint16_t>((crc >> 8) ^ kTable[(crc ^ byte) & 0xFF]);
    return Crc16{crc};
}

bool crc_ok(std::span<const std::uint8_t> frame)
{
    if (frame.size() < 2)
        return false;
    const auto crc = crc16(frame.first(frame.size() - 2));
    return frame[frame.size() - 2] == crc.lo() && frame[frame.size() - 1] == crc.hi();
}

} // namespace pmon::modbus
