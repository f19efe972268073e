#pragma once

#include "pmon/sim/simulator.hpp"
#include "pmon/transport/memory_bus.hpp"
#include "pmon/transport/tcp.hpp"

#include <atomic>
#include <memory>
#include <thread>

namespace pmon::sim {

struct SimInstanceConfig {
    SimSettings settings;
    transport::milliseconds tick_period{1000};
};

// Several analysers sharing one bus, each served by its own thread.
class SimHost {
public:
    // Throws std::invalid_argument when two instances share a unit address.
    SimHost(std::shared_ptr<transport::MemoryBus> bus, const std::vector<SimInstanceConfig>& instances,
            transport::Clock::time_point epoch = transport::Clock::now());
    ~SimHost();
    SimHost(const SimHost&) = delete;
    SimHost& operator=(const SimHost&) = delete;

    void start();
    void stop();

    Simulator* find(std::uint8_t unit);
    const std::vector<std::unique_ptr<Simulator>>& simulators() const { return sims_; }
    void post_all(Control control);
    const std::shared_ptr<transport::MemoryBus>& bus() const { return bus_; }

private:
    std::shared_ptr<transport::MemoryBus> bus_;
    std::vector<std::unique_ptr<Simulator>> sims_;
    std::vector<std::unique_ptr<transport::Channel>> ports_;
    std::vector<std::jthread> threads_;
};

// Carries raw RTU bytes between a TCP listener and a bus. One master
// connection at a time; a new connection replaces the previous one.
class TcpBridge {
public:
    // Throws std::system_error when the port cannot be bound.
    TcpBridge(std::shared_ptr<transport::MemoryBus> bus, const std::string& host, std::uint16_t port);
    ~TcpBridge();
    std::uint16_t port() const { return listener_.port(); }

private:
    void run(std::stop_token stop);

    std::shared_ptr<transport::MemoryBus> bus_;
    transport::TcpListener listener_;
    std::jthread thread_;
};

// Text control protocol for fault injection, one command per line:
//   fault <fuse_blown|voltage_sag|pump_off|restore> [unit]
//   status [unit]
// Replies are single lines starting with "ok" or "error".
std::string handle_admin_command(SimHost& host, std::string_view line);

class AdminServer {
public:
    AdminServer(SimHost& host, const std::string& bind_host, std::uint16_t port);
    ~AdminServer();
    std::uint16_t port() const { return listener_.port(); }

private:
    void run(std::stop_token stop);

    SimHost& host_;
    transport::TcpListener listener_;
    std::jthread thread_;
};

} // namespace pmon::sim
