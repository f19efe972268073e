#pragma once

#include "pmon/transport/channel.hpp"
#include "pmon/transport/endpoint.hpp"

namespace pmon::transport {

// RS485 adapter exposed as a tty. Throws std::system_error if the device
// cannot be opened or configured.
std::unique_ptr<Channel> open_serial(const std::string& path, const SerialSettings& settings);

} // namespace pmon::transport
