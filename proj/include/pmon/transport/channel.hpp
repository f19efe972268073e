#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmon::transport {

using Bytes = std::vector<std::uint8_t>;
using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

// Inter-frame silence that delimits RTU frames on every transport.
inline constexpr milliseconds kFrameGap{50};

class ChannelClosed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One endpoint on a byte stream. RTU frames carry no length prefix;
// framing is recovered by readers from frame headers and silence.
class Channel {
public:
    virtual ~Channel() = default;

    virtual void write(std::span<const std::uint8_t> bytes) = 0;
    // Waits up to `timeout` for bytes. Empty result means timeout;
    // ChannelClosed means the stream is gone.
    virtual Bytes read_some(milliseconds timeout) = 0;
    virtual void close() = 0;
    virtual std::string describe() const = 0;

    // Discards whatever is already buffered.
    void drain();
};

} // namespace pmon::transport
