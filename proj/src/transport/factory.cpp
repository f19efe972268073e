#include "pmon/transport/factory.hpp"

#include "pmon/transport/serial.hpp"
#include "pmon/transport/tcp.hpp"

namespace pmon::transport {

void ChannelFactory::add_bus(std::shared_ptr<MemoryBus> bus)
{
    buses_[bus->name()] = std::move(bus);
}

std::shared_ptr<MemoryBus> ChannelFactory::bus(const std::string& name) const
{
    auto it = buses_.find(name);
    return it == buses_.end() ? nullptr : it->second;
}

std::unique_ptr<Channel> ChannelFactory::open(const Endpoint& endpoint, const SerialSettings& serial,
                                              milliseconds connect_timeout) const
{
    auto channel = open_raw(endpoint, serial, connect_timeout);
    return wrap_ ? wrap_(std::move(channel)) : std::move(channel);
}

std::unique_ptr<Channel> ChannelFactory::open_raw(const Endpoint& endpoint, const SerialSettings& serial,
                                                  milliseconds connect_timeout) const
{
    switch (endpoint.kind) {
    case Endpoint::Kind::Tcp:
        return tcp_connect(endpoint.host, endpoint.port, connect_timeout);
    case Endpoint::Kind::Memory:
        if (auto b = bus(endpoint.name))
            return b->attach();
        throw std::invalid_argument("no in-process bus named '" + endpoint.name + "'");
    case Endpoint::Kind::Serial:
        return open_serial(endpoint.name, serial);
    }
    throw std::invalid_argument("unsupported endpoint");
}

} // namespace pmon::transport
