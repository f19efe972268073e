#include "pmon/modbus/frame.hpp"

#include "pmon/modbus/crc16.hpp"

#include <fmt/format.h>

namespace pmon::modbus {

namespace {

void append_crc(Bytes& frame)
{
    const auto crc = crc16(frame);
    frame.push_back(crc.lo());
    frame.push_back(crc.hi());
}

std::uint16_t be16(std::span<const std::uint8_t> bytes, std::size_t at)
{
    return static_cast<std::uint16_t>((bytes[at] << 8) | bytes[at + 1]);
}

} // namespace

bool ReadRequest::valid() const
{
    return unit >= 1 && unit <= 247 && count >= 1 && count <= kMaxReadRegisters &&
           static_cast<std::uint32_t>(start) + count <= 0x10000;
}

const char* to_string(FrameErrc errc)
{
    switch (errc) {
    case FrameErrc::ShortFrame: return "short frame";
    case FrameErrc::CrcMismatch: return "crc mismatch";
    case FrameErrc::UnsupportedFunction: return "unsupported function";
    case FrameErrc::InvalidRequest: return "invalid request";
    case FrameErrc::UnitMismatch: return "unit mismatch";
    case FrameErrc::LengthMismatch: return "length mismatch";
    case FrameErrc::ExceptionReceived: return "exception received";
    }
    return "unknown";
}

FrameError::FrameError(FrameErrc errc, std::string what, std::uint8_t unit, std::uint8_t exception_code)
    : std::runtime_error(std::move(what)), errc_(errc), unit_(unit), exception_code_(exception_code)
{
}

Bytes encode_read_request(const ReadRequest& req)
{
    if (!req.valid())
        throw std::invalid_argument(
            fmt::format("invalid read request: unit={} start={} count={}", req.unit, req.start, req.count));
    Bytes frame{
        req.unit,
        kReadInputRegisters,
        static_cast<std::uint8_t>(req.start >> 8),
        static_cast<std::uint8_t>(req.start & 0xFF),
        static_cast<std::uint8_t>(req.count >> 8),
        static_cast<std::uint8_t>(req.count & 0xFF),
    };
    append_crc(frame);
    return frame;
}

ReadRequest decode_request(std::span<const std::uint8_t> frame)
{
    if (frame.size() < kRequestFrameSize)
        throw FrameError(FrameErrc::ShortFrame, fmt::format("request frame of {} bytes", frame.size()));
    if (!crc_ok(frame))
        throw FrameError(FrameErrc::CrcMismatch, "request crc mismatch");
    const std::uint8_t unit = frame[0];
    if (frame[1] != kReadInputRegisters)
        throw FrameError(FrameErrc::UnsupportedFunction, fmt::format("function 0x{:02X} not supported", frame[1]),
                         unit);
    if (frame.size() != kRequestFrameSize)
        throw FrameError(FrameErrc::InvalidRequest, fmt::format("read request of {} bytes", frame.size()), unit);
    ReadRequest req{unit, be16(frame, 2), be16(frame, 4)};
    if (!req.valid())
        throw FrameError(FrameErrc::InvalidRequest,
                         fmt::format("start={} count={} out of range", req.start, req.count), unit);
    return req;
}

Bytes encode_read_response(std::uint8_t unit, std::span<const std::uint16_t> registers)
{
    if (registers.empty() || registers.size() > kMaxReadRegisters)
        throw std::invalid_argument(fmt::format("response with {} registers", registers.size()));
    Bytes frame;
    frame.reserve(5 + 2 * registers.size());
    frame.push_back(unit);
    frame.push_back(kReadInputRegisters);
    frame.push_back(static_cast<std::uint8_t>(2 * registers.size()));
    for (std::uint16_t word : registers) {
        frame.push_back(static_cast<std::uint8_t>(word >> 8));
        frame.push_back(static_cast<std::uint8_t>(word & 0xFF));
    }
    append_crc(frame);
    return frame;
}

Bytes encode_exception(const ExceptionResponse& ex)
{
    Bytes frame{ex.unit, static_cast<std::uint8_t>(ex.function | kExceptionFlag), static_cast<std::uint8_t>(ex.code)};
    append_crc(frame);
    return frame;
}

std::vector<std::uint16_t> decode_response(std::span<const std::uint8_t> frame, const ReadRequest& expected)
{
    if (frame.size() < kExceptionFrameSize)
        throw FrameError(FrameErrc::ShortFrame, fmt::format("response frame of {} bytes", frame.size()));
    if (!crc_ok(frame))
        throw FrameError(FrameErrc::CrcMismatch, "response crc mismatch");
    const std::uint8_t unit = frame[0];
    if (unit != expected.unit)
        throw FrameError(FrameErrc::UnitMismatch, fmt::format("response from unit {}, expected {}", unit, expected.unit),
                         unit);
    if (frame[1] == (kReadInputRegisters | kExceptionFlag)) {
        if (frame.size() != kExceptionFrameSize)
            throw FrameError(FrameErrc::LengthMismatch, "exception frame length", unit);
        throw FrameError(FrameErrc::ExceptionReceived, fmt::format("device exception {:02X}", frame[2]), unit,
                         frame[2]);
    }
    if (frame[1] != kReadInputRegisters)
        throw FrameError(FrameErrc::UnsupportedFunction, fmt::format("response function 0x{:02X}", frame[1]), unit);
    const std::size_t byte_count = frame[2];
    if (byte_count != 2u * expected.count || frame.size() != 5 + byte_count)
        throw FrameError(FrameErrc::LengthMismatch,
                         fmt::format("byte count {} in {}-byte frame, expected {} registers", byte_count,
                                     frame.size(), expected.count),
                         unit);
    std::vector<std::uint16_t> words(expected.count);
    for (std::size_t i = 0; i < words.size(); ++i)
        words[i] = be16(frame, 3 + 2 * i);
    return words;
}

std::size_t expected_response_size(std::span<const std::uint8_t> prefix)
{
    if (prefix.size() < 2)
        return 0;
    if (prefix[1] == (kReadInputRegisters | kExceptionFlag))
        return kExceptionFrameSize;
    if (prefix[1] != kReadInputRegisters)
        return static_cast<std::size_t>(-1);
    if (prefix.size() < 3)
        return 0;
    return 5 + static_cast<std::size_t>(prefix[2]);
}

std::string to_hex(std::span<const std::uint8_t> bytes)
{
    std::string out;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i)
            out += ' ';
        out += fmt::format("{:02X}", bytes[i]);
    }
    return out;
}

} // namespace pmon::modbus
