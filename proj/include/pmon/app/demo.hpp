#pragma once

#include "pmon/api/server.hpp"
#include "pmon/gateway/gateway.hpp"
#include "pmon/sim/host.hpp"
#include "pmon/transport/bit_flip_proxy.hpp"

#include <filesystem>
#include <future>

namespace pmon::app {

struct ScheduledFault {
    transport::milliseconds at{0}; // after the demo epoch
    sim::FaultKind fault = sim::FaultKind::FuseBlown;
};

struct DemoOptions {
    std::filesystem::path store_path = "demo.store";
    std::string device = "pm01";
    std::uint8_t unit = 1;
    gateway::PollPolicy poll;
    std::uint64_t seed = 42;
    double power_factor = 0.85;
    std::vector<ScheduledFault> faults;
    // Probability of a one-bit error in each response chunk the gateway reads.
    double corrupt_rate = 0.0;
    std::uint64_t corrupt_seed = 7;
    // Empty disables the API.
    std::string api_bind;
    std::vector<api::AuthRecord> users;
    std::chrono::seconds token_ttl{std::chrono::hours{12}};
    std::string static_dir;
    sim::Simulator::ResponseTap tap;
    bool quiet = false;
};

// Simulator, gateway and API in one process, wired over an in-memory bus
// and the store file exactly as they would be across processes.
//
// The simulator ticks at epoch + k * interval and the gateway polls at
// epoch + interval/2 + k * interval, so each poll reads a whole tick and a
// given seed produces the same stored values on every run.
class Demo {
public:
    explicit Demo(DemoOptions options);
    ~Demo();
    Demo(const Demo&) = delete;
    Demo& operator=(const Demo&) = delete;

    void start();
    // Stops everything and returns the gateway's result.
    gateway::LoopResult stop();
    // Runs for `duration` after the epoch, or until `stop` is requested.
    gateway::LoopResult run_for(transport::milliseconds duration, std::stop_token stop = {});

    transport::Clock::time_point epoch() const { return epoch_; }
    TimePoint epoch_utc() const { return epoch_utc_; }
    std::optional<std::uint16_t> api_port() const { return api_port_; }
    sim::SimHost& sims() { return *sims_; }
    const transport::BitFlipProxy::Stats& corruption() const { return *flip_stats_; }
    const DemoOptions& options() const { return options_; }

private:
    DemoOptions options_;
    std::shared_ptr<transport::MemoryBus> bus_;
    std::unique_ptr<sim::SimHost> sims_;
    std::shared_ptr<store::Store> writer_;
    std::unique_ptr<api::ApiServer> api_;
    std::optional<std::uint16_t> api_port_;
    std::shared_ptr<transport::BitFlipProxy::Stats> flip_stats_;
    transport::Clock::time_point epoch_;
    TimePoint epoch_utc_;
    std::jthread gateway_;
    std::jthread scheduler_;
    std::promise<gateway::LoopResult> result_promise_;
    std::future<gateway::LoopResult> result_;
    bool started_ = false;
    std::optional<gateway::LoopResult> final_;
};

} // namespace pmon::app
