#pragma once

#include <cstdint>
#include <string>

namespace pmon::transport {

// Line settings for a real serial port. Advisory for TCP links, which
// carry the raw RTU bytes without a UART.
struct SerialSettings {
    int baud = 9600;
    char parity = 'N'; // 'N', 'E' or 'O'
    int data_bits = 8;
    int stop_bits = 1;
    friend bool operator==(const SerialSettings&, const SerialSettings&) = default;
};

// Parsed transport descriptor:
//   tcp://host:port      raw RTU bytes over TCP
//   mem://name           in-process bus (demo and tests)
//   serial:///dev/ttyX   RS485 adapter
struct Endpoint {
    enum class Kind { Tcp, Memory, Serial };
    Kind kind = Kind::Tcp;
    std::string host;
    std::uint16_t port = 0;
    std::string name; // memory bus name or serial device path

    std::string to_string() const;
    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

// Throws std::invalid_argument with a readable message.
Endpoint parse_endpoint(const std::string& text);

// "host:port" as used by --listen / api bind flags. Port 0 means "any".
std::pair<std::string, std::uint16_t> parse_host_port(const std::string& text);

} // namespace pmon::transport
