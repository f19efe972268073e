#include "pmon/sim/simulator.hpp"

#include "pmon/transport/rtu_framing.hpp"

#include <algorithm>

namespace pmon::sim {

using transport::Clock;
using transport::milliseconds;

Simulator::Simulator(SimSettings settings, milliseconds tick_period, Clock::time_point epoch)
    : unit_(settings.unit), tick_period_(tick_period), epoch_(epoch), published_(settings)
{
}

void Simulator::post(Control control)
{
    std::lock_guard lock(mutex_);
    inbox_.push_back(control);
}

SimState Simulator::snapshot() const
{
    std::lock_guard lock(mutex_);
    return published_;
}

std::uint64_t Simulator::frames_answered() const
{
    std::lock_guard lock(mutex_);
    return answered_;
}

void Simulator::apply_controls(SimState& state)
{
    std::vector<Control> pending;
    {
        std::lock_guard lock(mutex_);
        pending.swap(inbox_);
    }
    const double dt = tick_period_.count() > 0 ? tick_period_.count() / 1000.0 : 1.0;
    for (const auto& c : pending) {
        if (const auto* fault = std::get_if<FaultKind>(&c))
            state = inject_fault(std::move(state), *fault);
        else
            for (int i = 0; i < std::get<ManualTick>(c).count; ++i)
                state = tick(std::move(state), dt);
    }
}

void Simulator::catch_up(SimState& state, Clock::time_point now)
{
    if (tick_period_.count() <= 0 || now < epoch_)
        return;
    const auto due = static_cast<std::uint64_t>((now - epoch_) / tick_period_);
    const double dt = tick_period_.count() / 1000.0;
    // Manual ticks also advance state.ticks; the wall clock only adds what is missing.
    while (state.ticks < due)
        state = tick(std::move(state), dt);
}

void Simulator::publish(const SimState& state)
{
    std::lock_guard lock(mutex_);
    published_ = state;
}

void Simulator::serve(transport::Channel& channel, std::stop_token stop)
{
    SimState state = snapshot();
    transport::RequestScanner scanner;
    auto last_byte = Clock::now();
    constexpr milliseconds kPollSlice{10};

    while (!stop.stop_requested()) {
        apply_controls(state);
        catch_up(state, Clock::now());
        publish(state);

        transport::Bytes chunk;
        try {
            chunk = channel.read_some(kPollSlice);
        } catch (const transport::ChannelClosed&) {
            return;
        }
        const auto now = Clock::now();
        if (chunk.empty()) {
            if (scanner.buffered() && now - last_byte >= transport::kFrameGap)
                scanner.reset();
            continue;
        }
        last_byte = now;
        scanner.feed(chunk);

        // Faults and ticks that arrived while waiting apply before answering.
        apply_controls(state);
        catch_up(state, now);
        while (auto frame = scanner.next()) {
            auto response = handle_request(state, *frame);
            if (!response)
                continue;
            try {
                channel.write(*response);
            } catch (const transport::ChannelClosed&) {
                return;
            }
            {
                std::lock_guard lock(mutex_);
                ++answered_;
            }
            if (tap_) {
                modbus::ReadRequest req{(*frame)[0],
                                        static_cast<std::uint16_t>(((*frame)[2] << 8) | (*frame)[3]),
                                        static_cast<std::uint16_t>(((*frame)[4] << 8) | (*frame)[5])};
                tap_(req, *response);
            }
        }
        publish(state);
    }
}

} // namespace pmon::sim
