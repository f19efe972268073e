#include "pmon/transport/rtu_framing.hpp"

#include "pmon/modbus/crc16.hpp"
#include "pmon/modbus/frame.hpp"

#include <algorithm>

namespace pmon::transport {

std::optional<Bytes> read_response_frame(Channel& channel, Clock::time_point deadline, milliseconds gap)
{
    Bytes frame;
    for (;;) {
        const auto now = Clock::now();
        milliseconds wait;
        if (frame.empty()) {
            if (now >= deadline)
                return std::nullopt;
            wait = std::chrono::ceil<milliseconds>(deadline - now);
        } else {
            wait = gap;
        }
        auto chunk = channel.read_some(wait);
        if (chunk.empty()) {
            if (frame.empty())
                return std::nullopt;
            return frame; // silence ends the frame
        }
        frame.insert(frame.end(), chunk.begin(), chunk.end());
        const auto need = modbus::expected_response_size(frame);
        if (need == static_cast<std::size_t>(-1))
            continue; // unknown header: only silence can end it
        if (need != 0 && frame.size() >= need) {
            frame.resize(need);
            return frame;
        }
    }
}

void RequestScanner::feed(std::span<const std::uint8_t> bytes)
{
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
    if (buffer_.size() > kMaxBuffered) {
        const auto keep = modbus::kRequestFrameSize - 1;
        buffer_.erase(buffer_.begin(), buffer_.end() - static_cast<std::ptrdiff_t>(keep));
    }
}

std::optional<Bytes> RequestScanner::next()
{
    constexpr auto n = modbus::kRequestFrameSize;
    for (std::size_t at = 0; at + n <= buffer_.size(); ++at) {
        std::span<const std::uint8_t> window(buffer_.data() + at, n);
        if (window[0] == 0 || window[1] == 0 || window[1] >= 0x80)
            continue;
        if (!modbus::crc_ok(window))
            continue;
        Bytes frame(window.begin(), window.end());
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(at + n));
        return frame;
    }
    return std::nullopt;
}

} // namespace pmon::transport
