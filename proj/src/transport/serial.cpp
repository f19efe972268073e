#include "pmon/transport/serial.hpp"

#include <fcntl.h>
#include <poll.h>
#include <termios.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <system_error>

namespace pmon::transport {

namespace {

speed_t to_speed(int baud)
{
    switch (baud) {
    case 1200: return B1200;
    case 2400: return B2400;
    case 4800: return B4800;
    case 9600: return B9600;
    case 19200: return B19200;
    case 38400: return B38400;
    case 57600: return B57600;
    case 115200: return B115200;
    default: throw std::system_error(std::make_error_code(std::errc::invalid_argument), "unsupported baud rate");
    }
}

class SerialChannel final : public Channel {
public:
    SerialChannel(int fd, std::string path) : fd_(fd), path_(std::move(path)) {}
    ~SerialChannel() override { close(); }

    void write(std::span<const std::uint8_t> bytes) override
    {
        std::size_t sent = 0;
        while (sent < bytes.size()) {
            if (fd_ < 0)
                throw ChannelClosed(describe() + " closed");
            const auto n = ::write(fd_, bytes.data() + sent, bytes.size() - sent);
            if (n < 0) {
                if (errno == EINTR || errno == EAGAIN)
                    continue;
                throw ChannelClosed(describe() + ": " + std::strerror(errno));
            }
            sent += static_cast<std::size_t>(n);
        }
        ::tcdrain(fd_);
    }

    Bytes read_some(milliseconds timeout) override
    {
        if (fd_ < 0)
            throw ChannelClosed(describe() + " closed");
        pollfd pfd{fd_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
        if (rc <= 0)
            return {};
        Bytes buf(256);
        const auto n = ::read(fd_, buf.data(), buf.size());
        if (n < 0 && (errno == EAGAIN || errno == EINTR))
            return {};
        if (n <= 0)
            throw ChannelClosed(describe() + " read failed");
        buf.resize(static_cast<std::size_t>(n));
        return buf;
    }

    void close() override
    {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

    std::string describe() const override { return "serial://" + path_; }

private:
    int fd_;
    std::string path_;
};

} // namespace

std::unique_ptr<Channel> open_serial(const std::string& path, const SerialSettings& settings)
{
    const int fd = ::open(path.c_str(), O_RDWR | O_NOCTTY | O_NONBLOCK | O_CLOEXEC);
    if (fd < 0)
        throw std::system_error(errno, std::generic_category(), "open " + path);
    termios tio{};
    if (::tcgetattr(fd, &tio) < 0) {
        auto err = std::system_error(errno, std::generic_category(), "tcgetattr " + path);
        ::close(fd);
        throw err;
    }
    ::cfmakeraw(&tio);
    try {
        const auto speed = to_speed(settings.baud);
        ::cfsetispeed(&tio, speed);
        ::cfsetospeed(&tio, speed);
    } catch (...) {
        ::close(fd);
        throw;
    }
    tio.c_cflag &= ~static_cast<tcflag_t>(CSIZE | PARENB | PARODD | CSTOPB);
    tio.c_cflag |= CLOCAL | CREAD;
    tio.c_cflag |= settings.data_bits == 7 ? CS7 : CS8;
    if (settings.parity == 'E')
        tio.c_cflag |= PARENB;
    else if (settings.parity == 'O')
        tio.c_cflag |= PARENB | PARODD;
    if (settings.stop_bits == 2)
        tio.c_cflag |= CSTOPB;
    if (::tcsetattr(fd, TCSANOW, &tio) < 0) {
        auto err = std::system_error(errno, std::generic_category(), "tcsetattr " + path);
        ::close(fd);
        throw err;
    }
    ::tcflush(fd, TCIOFLUSH);
    return std::make_unique<SerialChannel>(fd, path);
}

} // namespace pmon::transport
