#pragma once

#include "pmon/api/auth.hpp"
#include "pmon/gateway/gateway.hpp"
#include "pmon/sim/host.hpp"

#include "json.hpp"

#include <filesystem>

namespace pmon::config {

// Raised for any schema violation; `where` is a JSON pointer such as
// "/devices/0/unit".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string where, const std::string& message);
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

struct SimEntry {
    sim::SimInstanceConfig instance;
    std::string listen; // host:port carrying raw RTU bytes
    std::string admin;  // optional host:port for the fault-injection control port
};

struct Config {
    std::vector<gateway::DeviceConfig> devices;
    gateway::PollPolicy poll;
    std::string store_path = "pmon.store";
    std::string api_bind = "127.0.0.1:8080";
    std::chrono::seconds token_ttl{std::chrono::hours{12}};
    std::string static_dir;
    std::vector<api::AuthRecord> users;
    std::vector<SimEntry> sims;
};

// One analyser "pm01", unit 1, on tcp://127.0.0.1:15020.
Config default_config();

Config parse_config(const nlohmann::json& doc);
Config load_config(const std::filesystem::path& path);
nlohmann::json to_json(const Config& config);

// Cross-field rules: unique device names, unique units per transport,
// unique units per simulator listener.
void validate(const Config& config);

} // namespace pmon::config
