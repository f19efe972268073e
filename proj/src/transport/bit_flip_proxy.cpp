#include "pmon/transport/bit_flip_proxy.hpp"

namespace pmon::transport {

BitFlipProxy::BitFlipProxy(std::unique_ptr<Channel> inner, double probability, std::uint64_t seed,
                           std::shared_ptr<Stats> stats)
    : inner_(std::move(inner)), probability_(probability), rng_(seed), stats_(std::move(stats))
{
}

Bytes BitFlipProxy::read_some(milliseconds timeout)
{
    auto bytes = inner_->read_some(timeout);
    if (bytes.empty())
        return bytes;
    ++stats_->seen;
    if (std::bernoulli_distribution(probability_)(rng_)) {
        std::uniform_int_distribution<std::size_t> pick(0, bytes.size() * 8 - 1);
        const auto bit = pick(rng_);
        bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        ++stats_->corrupted;
    }
    return bytes;
}

} // namespace pmon::transport
