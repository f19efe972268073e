#pragma once

#include "pmon/transport/channel.hpp"

#include <atomic>
#include <mutex>
#include <random>

namespace pmon::transport {

// Wraps a master's channel and flips one random bit in a fraction of the
// chunks it receives, emulating line noise on responses.
class BitFlipProxy final : public Channel {
public:
    struct Stats {
        std::atomic<std::uint64_t> seen{0};
        std::atomic<std::uint64_t> corrupted{0};
    };

    BitFlipProxy(std::unique_ptr<Channel> inner, double probability, std::uint64_t seed,
                 std::shared_ptr<Stats> stats = std::make_shared<Stats>());

    void write(std::span<const std::uint8_t> bytes) override { inner_->write(bytes); }
    Bytes read_some(milliseconds timeout) override;
    void close() override { inner_->close(); }
    std::string describe() const override { return inner_->describe() + " (bit-flip)"; }

    const Stats& stats() const { return *stats_; }

private:
    std::unique_ptr<Channel> inner_;
    double probability_;
    std::mt19937_64 rng_;
    std::shared_ptr<Stats> stats_;
};

} // namespace pmon::transport
