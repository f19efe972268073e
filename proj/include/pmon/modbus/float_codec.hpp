#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>

namespace pmon::modbus {

// Raised when two registers carry a NaN or infinity; a meter reading is
// never allowed to be either.
class DecodeError : public std::runtime_error {
public:
    enum class Kind { NaN, Infinity };
    DecodeError(Kind kind, std::uint32_t bits);
    Kind kind() const noexcept { return kind_; }
    std::uint32_t bits() const noexcept { return bits_; }

private:
    Kind kind_;
    std::uint32_t bits_;
};

// IEEE-754 binary32 spread over two registers, high word at the lower
// register address.
float f32_from_registers(std::uint16_t hi, std::uint16_t lo);

// Throws std::invalid_argument for non-finite input.
std::pair<std::uint16_t, std::uint16_t> f32_to_registers(float value);

} // namespace pmon::modbus
