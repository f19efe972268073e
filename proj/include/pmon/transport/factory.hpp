#pragma once

#include "pmon/transport/endpoint.hpp"
#include "pmon/transport/memory_bus.hpp"

#include <functional>
#include <map>

namespace pmon::transport {

// Opens channels for transport descriptors. In-process buses must be
// registered before a mem:// endpoint can be opened.
class ChannelFactory {
public:
    void add_bus(std::shared_ptr<MemoryBus> bus);
    std::shared_ptr<MemoryBus> bus(const std::string& name) const;

    // Throws std::system_error / ChannelClosed / std::invalid_argument.
    std::unique_ptr<Channel> open(const Endpoint& endpoint, const SerialSettings& serial,
                                  milliseconds connect_timeout) const;

    // Applied to every channel open() returns (fault-injection proxies).
    using Wrapper = std::function<std::unique_ptr<Channel>(std::unique_ptr<Channel>)>;
    void set_wrapper(Wrapper wrap) { wrap_ = std::move(wrap); }

private:
    std::unique_ptr<Channel> open_raw(const Endpoint& endpoint, const SerialSettings& serial,
                                      milliseconds connect_timeout) const;

    Wrapper wrap_;
    std::map<std::string, std::shared_ptr<MemoryBus>> buses_;
};

} // namespace pmon::transport
