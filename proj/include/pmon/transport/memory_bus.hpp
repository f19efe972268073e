#pragma once

#include "pmon/transport/channel.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <utility>

namespace pmon::transport {

// In-process multi-drop medium: bytes written by one endpoint are delivered
// to every other attached endpoint, like an RS485 pair.
class MemoryBus : public std::enable_shared_from_this<MemoryBus> {
public:
    static std::shared_ptr<MemoryBus> create(std::string name = "mem");

    std::unique_ptr<Channel> attach();
    // Every endpoint sees ChannelClosed from now on.
    void close();
    const std::string& name() const { return name_; }

private:
    struct Endpoint {
        std::deque<std::uint8_t> inbox;
        bool detached = false;
    };
    class Port;

    explicit MemoryBus(std::string name) : name_(std::move(name)) {}

    std::string name_;
    std::mutex mutex_;
    std::condition_variable readable_;
    std::vector<std::shared_ptr<Endpoint>> endpoints_;
    bool closed_ = false;
};

// Point-to-point duplex pipe: a two-endpoint bus.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_pipe();

} // namespace pmon::transport
