#pragma once

#include "pmon/sim/analyser.hpp"
#include "pmon/transport/channel.hpp"

#include <functional>
#include <mutex>
#include <stop_token>
#include <variant>
#include <vector>

namespace pmon::sim {

// Advances the state by N ticks regardless of the wall clock. Used with a
// zero tick period, where the clock is frozen unless ticked by hand.
struct ManualTick {
    int count = 1;
};

using Control = std::variant<FaultKind, ManualTick>;

// Hosts one analyser as an RTU slave on a channel. The serve loop owns the
// state; other threads talk to it only through post().
class Simulator {
public:
    using ResponseTap = std::function<void(const modbus::ReadRequest&, std::span<const std::uint8_t> response)>;

    // `tick_period` of zero freezes the clock. Ticks are counted from `epoch`
    // so runs that share an epoch see the same tick at the same instant.
    Simulator(SimSettings settings, transport::milliseconds tick_period,
              transport::Clock::time_point epoch = transport::Clock::now());

    // Runs until `stop` is requested or the channel closes.
    void serve(transport::Channel& channel, std::stop_token stop);

    void post(Control control);
    // Copy of the state as of the last loop iteration.
    SimState snapshot() const;
    std::uint8_t unit() const { return unit_; }
    // Called from the serve loop for every frame transmitted.
    void set_response_tap(ResponseTap tap) { tap_ = std::move(tap); }

    std::uint64_t frames_answered() const;

private:
    void apply_controls(SimState& state);
    void catch_up(SimState& state, transport::Clock::time_point now);
    void publish(const SimState& state);

    std::uint8_t unit_;
    transport::milliseconds tick_period_;
    transport::Clock::time_point epoch_;
    ResponseTap tap_;

    mutable std::mutex mutex_;
    std::vector<Control> inbox_;
    SimState published_;
    std::uint64_t answered_ = 0;
};

} // namespace pmon::sim
