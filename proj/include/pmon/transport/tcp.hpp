#pragma once

#include "pmon/transport/channel.hpp"

#include <optional>

namespace pmon::transport {

// Raw RTU bytes over a connected TCP socket (no MBAP header).
class TcpChannel final : public Channel {
public:
    TcpChannel(int fd, std::string peer);
    ~TcpChannel() override;
    TcpChannel(const TcpChannel&) = delete;
    TcpChannel& operator=(const TcpChannel&) = delete;

    void write(std::span<const std::uint8_t> bytes) override;
    Bytes read_some(milliseconds timeout) override;
    void close() override;
    std::string describe() const override { return "tcp://" + peer_; }

private:
    int fd_;
    std::string peer_;
};

// Throws std::system_error when the peer cannot be reached.
std::unique_ptr<Channel> tcp_connect(const std::string& host, std::uint16_t port, milliseconds timeout);

class TcpListener {
public:
    // Throws std::system_error on bind failure (e.g. port in use).
    TcpListener(const std::string& host, std::uint16_t port);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::unique_ptr<Channel> accept(milliseconds timeout);
    std::uint16_t port() const { return port_; }

private:
    int fd_;
    std::uint16_t port_;
};

} // namespace pmon::transport
