#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmon::modbus {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kReadInputRegisters = 0x04;
inline constexpr std::uint8_t kExceptionFlag = 0x80;
inline constexpr int kMaxReadRegisters = 125;
inline constexpr std::size_t kRequestFrameSize = 8;
inline constexpr std::size_t kExceptionFrameSize = 5;

enum class ExceptionCode : std::uint8_t {
    IllegalFunction = 0x01,
    IllegalDataAddress = 0x02,
    IllegalDataValue = 0x03,
    DeviceFailure = 0x04,
};

struct ReadRequest {
    std::uint8_t unit = 1;
    std::uint16_t start = 0;
    std::uint16_t count = 1;

    // unit in [1,247], count in [1,125], start + count <= 65536
    bool valid() const;
    friend bool operator==(const ReadRequest&, const ReadRequest&) = default;
};

struct ReadResponse {
    std::uint8_t unit = 1;
    std::vector<std::uint16_t> registers;
    friend bool operator==(const ReadResponse&, const ReadResponse&) = default;
};

struct ExceptionResponse {
    std::uint8_t unit = 1;
    std::uint8_t function = kReadInputRegisters;
    ExceptionCode code = ExceptionCode::IllegalDataAddress;
};

enum class FrameErrc {
    ShortFrame,
    CrcMismatch,
    UnsupportedFunction,
    InvalidRequest,
    UnitMismatch,
    LengthMismatch,
    ExceptionReceived,
};

const char* to_string(FrameErrc errc);

class FrameError : public std::runtime_error {
public:
    FrameError(FrameErrc errc, std::string what, std::uint8_t unit = 0, std::uint8_t exception_code = 0);

    FrameErrc errc() const noexcept { return errc_; }
    // Unit byte of the offending frame, when the CRC held.
    std::uint8_t unit() const noexcept { return unit_; }
    // Valid for ExceptionReceived.
    std::uint8_t exception_code() const noexcept { return exception_code_; }

private:
    FrameErrc errc_;
    std::uint8_t unit_;
    std::uint8_t exception_code_;
};

Bytes encode_read_request(const ReadRequest& req);

// Slave side. CRC is checked before anything else is looked at.
//   ShortFrame / CrcMismatch   -> slave stays silent
//   UnsupportedFunction        -> slave answers exception 01
//   InvalidRequest             -> slave answers exception 03
ReadRequest decode_request(std::span<const std::uint8_t> frame);

Bytes encode_read_response(std::uint8_t unit, std::span<const std::uint16_t> registers);
Bytes encode_exception(const ExceptionResponse& ex);

// Master side: returns exactly expected.count words or throws FrameError.
std::vector<std::uint16_t> decode_response(std::span<const std::uint8_t> frame, const ReadRequest& expected);

// Number of bytes a complete response frame occupies, judged from its first
// bytes; 0 when more bytes are needed to tell, npos when the header is not a
// function 0x04 response or exception.
std::size_t expected_response_size(std::span<const std::uint8_t> prefix);

std::string to_hex(std::span<const std::uint8_t> bytes);

} // namespace pmon::modbus
