#include "pmon/gateway/gateway.hpp"

#include "pmon/log.hpp"
#include "pmon/modbus/float_codec.hpp"
#include "pmon/transport/rtu_framing.hpp"

#include <condition_variable>
#include <map>
#include <thread>

namespace pmon::gateway {

using modbus::FrameErrc;
using modbus::FrameError;
using modbus::ReadRequest;

RtuMaster::RtuMaster(Connector connect) : connect_(std::move(connect)) {}

RtuMaster::RtuMaster(std::unique_ptr<transport::Channel> channel) : channel_(std::move(channel)) {}

Exchange RtuMaster::transact(const ReadRequest& request, Clock::time_point deadline)
{
    std::lock_guard lock(bus_);
    const int now_in = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now_in > seen && !max_in_flight_.compare_exchange_weak(seen, now_in)) {
    }
    struct Leave {
        std::atomic<int>& n;
        ~Leave() { --n; }
    } leave{in_flight_};

    if (!channel_) {
        if (!connect_)
            return Exchange{Exchange::Status::NoLink, {}, 0};
        const auto left = std::chrono::duration_cast<milliseconds>(deadline - Clock::now());
        if (left.count() <= 0)
            return Exchange{Exchange::Status::NoLink, {}, 0};
        try {
            channel_ = connect_(left);
        } catch (const std::exception& e) {
            log::debug("connect failed: {}", e.what());
            std::this_thread::sleep_until(deadline);
            return Exchange{Exchange::Status::NoLink, {}, 0};
        }
    }

    try {
        channel_->drain(); // late answers to an earlier, timed-out request
        channel_->write(modbus::encode_read_request(request));
        ++requests_;
        auto frame = transport::read_response_frame(*channel_, deadline);
        if (!frame)
            return Exchange{Exchange::Status::Silence, {}, 0};
        try {
            return Exchange{Exchange::Status::Ok, modbus::decode_response(*frame, request), 0};
        } catch (const FrameError& e) {
            if (e.errc() == FrameErrc::ExceptionReceived)
                return {Exchange::Status::Exception, {}, e.exception_code()};
            return Exchange{Exchange::Status::Corrupt, {}, 0};
        }
    } catch (const transport::ChannelClosed& e) {
        log::debug("link lost: {}", e.what());
        channel_.reset();
        if (!connect_)
            std::this_thread::sleep_until(deadline);
        return Exchange{Exchange::Status::NoLink, {}, 0};
    }
}

namespace {

struct ReadOutcome {
    std::optional<std::vector<std::uint16_t>> words;
    GapReason reason = GapReason::Timeout;
    std::uint8_t code = 0;
};

ReadOutcome read_with_retries(RtuMaster& master, const ReadRequest& req, const PollPolicy& policy,
                              Clock::time_point cycle_deadline)
{
    ReadOutcome out;
    for (int attempt = 0; attempt < std::max(1, policy.retries); ++attempt) {
        const auto now = Clock::now();
        if (now >= cycle_deadline)
            break;
        const auto deadline = std::min(now + policy.timeout, cycle_deadline);
        auto ex = master.transact(req, deadline);
        switch (ex.status) {
        case Exchange::Status::Ok:
            out.words = std::move(ex.words);
            return out;
        case Exchange::Status::Exception:
            // A device exception is a definite answer; asking again won't change it.
            out.reason = GapReason::Exception;
            out.code = ex.exception_code;
            return out;
        case Exchange::Status::Corrupt:
            out.reason = GapReason::CrcError;
            break;
        case Exchange::Status::Silence:
        case Exchange::Status::NoLink:
            out.reason = GapReason::Timeout;
            break;
        }
    }
    return out;
}

GapEvent gap_for(const DeviceConfig& device, const ReadOutcome& r)
{
    return GapEvent{device.name, now_utc(), r.reason, r.code};
}

// A NaN or infinity can only come from a misbehaving meter.
GapEvent device_failure(const DeviceConfig& device)
{
    return GapEvent{device.name, now_utc(), GapReason::Exception,
                    static_cast<std::uint8_t>(modbus::ExceptionCode::DeviceFailure)};
}

} // namespace

Reading poll_device(RtuMaster& master, const DeviceConfig& device, const PollPolicy& policy,
                    Clock::time_point cycle_deadline)
{
    if (policy.bulk && device.register_map.is_contiguous_default())
        return read_all_fast(master, device, policy, cycle_deadline);

    Measurements values;
    for (auto kind : kAllKinds) {
        const ReadRequest req{device.unit, device.register_map.start(kind), RegisterMap::kBlockSize};
        auto r = read_with_retries(master, req, policy, cycle_deadline);
        if (!r.words)
            return gap_for(device, r);
        try {
            values.set(kind, modbus::f32_from_registers((*r.words)[0], (*r.words)[1]));
        } catch (const modbus::DecodeError&) {
            return device_failure(device);
        }
    }
    return Sample{device.name, now_utc(), values};
}

Reading read_all_fast(RtuMaster& master, const DeviceConfig& device, const PollPolicy& policy,
                      Clock::time_point cycle_deadline)
{
    if (!device.register_map.is_contiguous_default())
        throw std::invalid_argument("bulk read needs the contiguous default register map for " + device.name);
    const ReadRequest req{device.unit, 0, static_cast<std::uint16_t>(kMeasurementCount * RegisterMap::kBlockSize)};
    auto r = read_with_retries(master, req, policy, cycle_deadline);
    if (!r.words)
        return gap_for(device, r);
    Measurements values;
    try {
        for (std::size_t i = 0; i < kMeasurementCount; ++i)
            values.set(kAllKinds[i], modbus::f32_from_registers((*r.words)[2 * i], (*r.words)[2 * i + 1]));
    } catch (const modbus::DecodeError&) {
        return device_failure(device);
    }
    return Sample{device.name, now_utc(), values};
}

namespace {

class StopFlag {
public:
    void trip(std::string why)
    {
        std::lock_guard lock(mutex_);
        if (!tripped_) {
            tripped_ = true;
            diagnostic_ = std::move(why);
        }
        cv_.notify_all();
    }
    bool tripped() const
    {
        std::lock_guard lock(mutex_);
        return tripped_;
    }
    std::string diagnostic() const
    {
        std::lock_guard lock(mutex_);
        return diagnostic_;
    }
    // Returns false when woken by a stop.
    bool sleep_until(Clock::time_point t, const std::stop_token& stop)
    {
        std::unique_lock lock(mutex_);
        std::stop_callback cb(stop, [this] { cv_.notify_all(); });
        cv_.wait_until(lock, t, [&] { return tripped_ || stop.stop_requested(); });
        return !tripped_ && !stop.stop_requested();
    }

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    bool tripped_ = false;
    std::string diagnostic_;
};

std::string describe(const Reading& r)
{
    if (std::holds_alternative<Sample>(r))
        return "sample";
    return pmon::describe(std::get<GapEvent>(r));
}

} // namespace

LoopResult run_loop(const std::vector<DeviceConfig>& devices, const PollPolicy& policy, store::Store& sink,
                    std::stop_token stop, LoopOptions options)
{
    if (!policy.retries_fit_interval())
        log::warn("poll interval {} ms is shorter than timeout {} ms x {} retries; silent devices will be cut short",
                  policy.interval.count(), policy.timeout.count(), policy.retries);

    std::map<std::string, std::vector<const DeviceConfig*>> by_transport;
    for (const auto& d : devices)
        by_transport[d.transport.to_string()].push_back(&d);

    const auto first = options.first_deadline.value_or(Clock::now());
    const auto margin = std::min(milliseconds{50}, policy.interval / 10);
    StopFlag flag;
    std::atomic<std::uint64_t> samples{0}, gaps{0};

    auto poll_transport = [&](const std::vector<const DeviceConfig*>& group) {
        const auto& head = *group.front();
        RtuMaster master([&](milliseconds timeout) {
            return options.factory.open(head.transport, head.serial, timeout);
        });
        std::map<std::string, TimePoint> last_ts;
        const auto n = static_cast<long>(group.size());
        auto deadline = first;
        while (flag.sleep_until(deadline, stop)) {
            const auto cycle_end = deadline + policy.interval;
            for (long i = 0; i < n && !flag.tripped() && !stop.stop_requested(); ++i) {
                const auto& dev = *group[static_cast<std::size_t>(i)];
                const auto slice_end = deadline + policy.interval * (i + 1) / n - margin;
                const auto started = Clock::now();
                Reading reading = poll_device(master, dev, policy, slice_end);
                const auto latency = std::chrono::duration_cast<milliseconds>(Clock::now() - started);

                // Timestamps strictly increase per device.
                auto& ts = std::visit([](auto& v) -> TimePoint& { return v.ts; }, reading);
                if (auto it = last_ts.find(dev.name); it != last_ts.end() && ts <= it->second)
                    ts = it->second + milliseconds{1};
                last_ts[dev.name] = ts;

                try {
                    sink.append(reading);
                } catch (const std::exception& e) {
                    flag.trip("store append failed: " + std::string(e.what()));
                    return;
                }
                const bool ok = std::holds_alternative<Sample>(reading);
                ++(ok ? samples : gaps);
                CycleReport report{dev.name, describe(reading), latency};
                log::info("device={} outcome={} latency_ms={}", report.device, report.outcome, latency.count());
                if (options.on_cycle)
                    options.on_cycle(report);
            }
            deadline = cycle_end;
            const auto now = Clock::now();
            if (now > deadline + policy.interval) {
                const auto missed = (now - deadline) / policy.interval;
                log::warn("poll cycle overran; skipping {} missed deadline(s)", missed);
                deadline += policy.interval * missed;
            }
        }
    };

    {
        std::vector<std::jthread> workers;
        for (const auto& [name, group] : by_transport)
            workers.emplace_back([&, g = group] { poll_transport(g); });
    }

    LoopResult result;
    result.fatal = flag.tripped();
    result.diagnostic = flag.diagnostic();
    result.samples = samples;
    result.gaps = gaps;
    return result;
}

} // namespace pmon::gateway
