#include "pmon/transport/memory_bus.hpp"

#include <algorithm>

namespace pmon::transport {

void Channel::drain()
{
    while (!read_some(milliseconds{0}).empty()) {
    }
}

class MemoryBus::Port final : public Channel {
public:
    Port(std::shared_ptr<MemoryBus> bus, std::shared_ptr<Endpoint> self) : bus_(std::move(bus)), self_(std::move(self)) {}
    ~Port() override { detach(); }

    void write(std::span<const std::uint8_t> bytes) override
    {
        {
            std::lock_guard lock(bus_->mutex_);
            if (bus_->closed_ || self_->detached)
                throw ChannelClosed(describe() + " closed");
            for (auto& ep : bus_->endpoints_)
                if (ep != self_)
                    ep->inbox.insert(ep->inbox.end(), bytes.begin(), bytes.end());
        }
        bus_->readable_.notify_all();
    }

    Bytes read_some(milliseconds timeout) override
    {
        std::unique_lock lock(bus_->mutex_);
        bus_->readable_.wait_for(lock, timeout,
                                 [&] { return bus_->closed_ || self_->detached || !self_->inbox.empty(); });
        if (!self_->inbox.empty()) {
            Bytes out(self_->inbox.begin(), self_->inbox.end());
            self_->inbox.clear();
            return out;
        }
        if (bus_->closed_ || self_->detached)
            throw ChannelClosed(describe() + " closed");
        return {};
    }

    void close() override { detach(); }

    std::string describe() const override { return "mem://" + bus_->name(); }

private:
    void detach()
    {
        {
            std::lock_guard lock(bus_->mutex_);
            if (self_->detached)
                return;
            self_->detached = true;
            auto& eps = bus_->endpoints_;
            eps.erase(std::remove(eps.begin(), eps.end(), self_), eps.end());
        }
        bus_->readable_.notify_all();
    }

    std::shared_ptr<MemoryBus> bus_;
    std::shared_ptr<Endpoint> self_;
};

std::shared_ptr<MemoryBus> MemoryBus::create(std::string name)
{
    return std::shared_ptr<MemoryBus>(new MemoryBus(std::move(name)));
}

std::unique_ptr<Channel> MemoryBus::attach()
{
    auto ep = std::make_shared<Endpoint>();
    {
        std::lock_guard lock(mutex_);
        if (closed_)
            throw ChannelClosed("mem://" + name_ + " closed");
        endpoints_.push_back(ep);
    }
    return std::make_unique<Port>(shared_from_this(), std::move(ep));
}

void MemoryBus::close()
{
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    readable_.notify_all();
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_pipe()
{
    auto bus = MemoryBus::create("pipe");
    auto a = bus->attach();
    auto b = bus->attach();
    return {std::move(a), std::move(b)};
}

} // namespace pmon::transport
