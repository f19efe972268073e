#pragma once

#include "pmon/modbus/frame.hpp"
#include "pmon/register_map.hpp"
#include "pmon/sample.hpp"
#include "pmon/store/store.hpp"
#include "pmon/transport/factory.hpp"

#include <atomic>
#include <functional>
#include <mutex>
#include <optional>
#include <stop_token>

namespace pmon::gateway {

using transport::Clock;
using transport::milliseconds;

struct DeviceConfig {
    std::string name;
    std::uint8_t unit = 1;
    transport::Endpoint transport;
    transport::SerialSettings serial;
    RegisterMap register_map = RegisterMap::contiguous();
};

struct PollPolicy {
    milliseconds interval{1000};
    milliseconds timeout{500};
    int retries = 3;   // attempts per request
    bool bulk = false; // one 12-register read instead of six 2-register reads

    // A silent device can outlast the interval when this is false; the cycle
    // budget then cuts the retries short.
    bool retries_fit_interval() const { return timeout * retries <= interval; }
};

// Outcome of one request/response exchange.
struct Exchange {
    enum class Status { Ok, Silence, Corrupt, Exception, NoLink };
    Status status = Status::Silence;
    std::vector<std::uint16_t> words;
    std::uint8_t exception_code = 0;
};

// Modbus master on one transport. transact() holds the bus for the whole
// exchange, so callers on different threads never interleave frames.
class RtuMaster {
public:
    using Connector = std::function<std::unique_ptr<transport::Channel>(milliseconds)>;

    explicit RtuMaster(Connector connect);
    explicit RtuMaster(std::unique_ptr<transport::Channel> channel);

    Exchange transact(const modbus::ReadRequest& request, Clock::time_point deadline);

    std::uint64_t requests_sent() const { return requests_.load(); }
    // Highest number of simultaneous transact() bodies ever observed; 1 on a
    // well-behaved bus.
    int max_in_flight() const { return max_in_flight_.load(); }

private:
    Connector connect_;
    std::unique_ptr<transport::Channel> channel_;
    std::mutex bus_;
    std::atomic<std::uint64_t> requests_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
};

// Six two-register reads in kind order (or one bulk read when the policy
// asks for it). Every read is retried up to policy.retries times; no
// attempt outlives `cycle_deadline`. Any terminal failure is a GapEvent.
Reading poll_device(RtuMaster& master, const DeviceConfig& device, const PollPolicy& policy,
                    Clock::time_point cycle_deadline);

// Single read of 12 registers from 0x0000. Throws std::invalid_argument
// unless the device uses the contiguous default map.
Reading read_all_fast(RtuMaster& master, const DeviceConfig& device, const PollPolicy& policy,
                      Clock::time_point cycle_deadline);

struct CycleReport {
    std::string device;
    std::string outcome; // "sample" or GapEvent description
    milliseconds latency{0};
};

struct LoopOptions {
    transport::ChannelFactory factory;
    // First poll instant; defaults to "now".
    std::optional<Clock::time_point> first_deadline;
    std::function<void(const CycleReport&)> on_cycle;
};

struct LoopResult {
    bool fatal = false;
    std::string diagnostic;
    std::uint64_t samples = 0;
    std::uint64_t gaps = 0;
};

// Polls every device once per interval until `stop` is requested or the
// store fails. Devices sharing a transport are polled one after another on
// one thread; distinct transports run in parallel. Deadlines advance by a
// fixed interval from the first one, independent of how long cycles take.
LoopResult run_loop(const std::vector<DeviceConfig>& devices, const PollPolicy& policy, store::Store& sink,
                    std::stop_token stop, LoopOptions options = {});

} // namespace pmon::gateway
