#pragma once

#include "pmon/transport/channel.hpp"

#include <optional>

namespace pmon::transport {

// Master side: collects one response frame. Completion is decided from the
// frame header (function 0x04 byte count, or a 5-byte exception); anything
// else ends after kFrameGap of silence. Returns nullopt when nothing at all
// arrived before `deadline`.
std::optional<Bytes> read_response_frame(Channel& channel, Clock::time_point deadline,
                                         milliseconds gap = kFrameGap);

// Slave side: finds request frames in a byte stream that may carry noise,
// other slaves' responses, or frames for other units. A candidate is any
// eight-byte window whose trailing CRC checks; bytes before it are dropped.
class RequestScanner {
public:
    static constexpr std::size_t kMaxBuffered = 512;

    void feed(std::span<const std::uint8_t> bytes);
    std::optional<Bytes> next();
    // Called after a frame gap: whatever is buffered cannot start a frame.
    void reset() { buffer_.clear(); }
    std::size_t buffered() const { return buffer_.size(); }

private:
    Bytes buffer_;
};

} // namespace pmon::transport
