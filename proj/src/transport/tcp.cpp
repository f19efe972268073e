#include "pmon/transport/tcp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <system_error>

namespace pmon::transport {

namespace {

std::system_error sys_error(const std::string& what)
{
    return std::system_error(errno, std::generic_category(), what);
}

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive)
{
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive)
        hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const auto service = std::to_string(port);
    if (int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res); rc != 0)
        throw std::system_error(std::make_error_code(std::errc::host_unreachable),
                                "resolve " + host + ": " + ::gai_strerror(rc));
    return res;
}

void set_nodelay(int fd)
{
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

} // namespace

TcpChannel::TcpChannel(int fd, std::string peer) : fd_(fd), peer_(std::move(peer))
{
    set_nodelay(fd_);
}

TcpChannel::~TcpChannel()
{
    close();
}

void TcpChannel::close()
{
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

void TcpChannel::write(std::span<const std::uint8_t> bytes)
{
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        if (fd_ < 0)
            throw ChannelClosed(describe() + " closed");
        const auto n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw ChannelClosed(describe() + ": " + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
}

Bytes TcpChannel::read_some(milliseconds timeout)
{
    if (fd_ < 0)
        throw ChannelClosed(describe() + " closed");
    pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc < 0) {
        if (errno == EINTR)
            return {};
        throw ChannelClosed(describe() + ": " + std::strerror(errno));
    }
    if (rc == 0)
        return {};
    Bytes buf(512);
    const auto n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n <= 0)
        throw ChannelClosed(describe() + " peer closed");
    buf.resize(static_cast<std::size_t>(n));
    return buf;
}

std::unique_ptr<Channel> tcp_connect(const std::string& host, std::uint16_t port, milliseconds timeout)
{
    addrinfo* res = resolve(host, port, false);
    const int fd = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        throw sys_error("socket");
    }
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc < 0 && errno != EINPROGRESS) {
        auto err = sys_error("connect " + host + ":" + std::to_string(port));
        ::close(fd);
        throw err;
    }
    if (rc < 0) {
        pollfd pfd{fd, POLLOUT, 0};
        rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
        int soerr = 0;
        socklen_t len = sizeof soerr;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &soerr, &len);
        if (rc <= 0 || soerr != 0) {
            ::close(fd);
            throw std::system_error(rc == 0 ? ETIMEDOUT : soerr, std::generic_category(),
                                    "connect " + host + ":" + std::to_string(port));
        }
    }
    ::fcntl(fd, F_SETFL, flags);
    return std::make_unique<TcpChannel>(fd, host + ":" + std::to_string(port));
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) : fd_(-1), port_(port)
{
    addrinfo* res = resolve(host, port, true);
    fd_ = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol);
    if (fd_ < 0) {
        ::freeaddrinfo(res);
        throw sys_error("socket");
    }
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd_, res->ai_addr, res->ai_addrlen) < 0 || ::listen(fd_, 4) < 0) {
        auto err = sys_error("bind " + host + ":" + std::to_string(port));
        ::freeaddrinfo(res);
        ::close(fd_);
        throw err;
    }
    ::freeaddrinfo(res);
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) == 0)
        port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener()
{
    if (fd_ >= 0)
        ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::accept(milliseconds timeout)
{
    pollfd pfd{fd_, POLLIN, 0};
    if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0)
        return nullptr;
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    const int fd = ::accept4(fd_, reinterpret_cast<sockaddr*>(&addr), &len, SOCK_CLOEXEC);
    if (fd < 0)
        return nullptr;
    char ip[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &addr.sin_addr, ip, sizeof ip);
    return std::make_unique<TcpChannel>(fd, std::string(ip) + ":" + std::to_string(ntohs(addr.sin_port)));
}

} // namespace pmon::transport
