#include "pmon/transport/endpoint.hpp"

#include <charconv>
#include <stdexcept>
#include <tuple>

namespace pmon::transport {

std::string Endpoint::to_string() const
{
    switch (kind) {
    case Kind::Tcp: return "tcp://" + host + ":" + std::to_string(port);
    case Kind::Memory: return "mem://" + name;
    case Kind::Serial: return "serial://" + name;
    }
    return {};
}

std::pair<std::string, std::uint16_t> parse_host_port(const std::string& text)
{
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        throw std::invalid_argument("expected host:port, got '" + text + "'");
    unsigned port = 0;
    const char* first = text.data() + colon + 1;
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || ptr != last || port > 65535)
        throw std::invalid_argument("bad port in '" + text + "'");
    return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

Endpoint parse_endpoint(const std::string& text)
{
    const auto sep = text.find("://");
    if (sep == std::string::npos)
        throw std::invalid_argument("transport '" + text + "' has no scheme (tcp://, mem://, serial://)");
    const auto scheme = text.substr(0, sep);
    const auto rest = text.substr(sep + 3);
    Endpoint ep;
    if (scheme == "tcp") {
        ep.kind = Endpoint::Kind::Tcp;
        std::tie(ep.host, ep.port) = parse_host_port(rest);
        if (ep.port == 0)
            throw std::invalid_argument("tcp transport needs a nonzero port");
    } else if (scheme == "mem") {
        if (rest.empty())
            throw std::invalid_argument("mem:// transport needs a bus name");
        ep.kind = Endpoint::Kind::Memory;
        ep.name = rest;
    } else if (scheme == "serial") {
        if (rest.empty() || rest.front() != '/')
            throw std::invalid_argument("serial:// transport needs an absolute device path");
        ep.kind = Endpoint::Kind::Serial;
        ep.name = rest;
    } else {
        throw std::invalid_argument("unknown transport scheme '" + scheme + "'");
    }
    return ep;
}

} // namespace pmon::transport
