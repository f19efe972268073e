#pragma once

#include "pmon/api/auth.hpp"
#include "pmon/store/store.hpp"

#include <memory>
#include <thread>

namespace httplib {
class Server;
}

namespace pmon::api {

struct DeviceEntry {
    std::string name;
    int unit = 1;
};

struct ApiOptions {
    std::vector<DeviceEntry> devices;
    std::size_t default_limit = 1000;
    std::size_t max_limit = 10000;
    std::string static_dir; // optional dashboard assets mounted at "/"
};

// HTTP/1.1 JSON service over a store. Every route except POST /api/login
// needs "Authorization: Bearer <token>".
//
//   POST /api/login                       {username,password} -> {token,expires}
//   GET  /api/devices                     [{name,unit,last_seen}]
//   GET  /api/devices/{name}/latest       sample, or 204 before the first one
//   GET  /api/devices/{name}/records      {"<name>":[rows as strings]}, X-Truncated header
class ApiServer {
public:
    ApiServer(std::shared_ptr<store::Store> store, std::shared_ptr<Authenticator> auth, ApiOptions options);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    // Throws std::system_error when the address cannot be bound. Port 0
    // picks a free port.
    std::uint16_t bind(const std::string& host, std::uint16_t port);
    // Serves on a background thread until stop().
    void start();
    // Serves on the calling thread until stop().
    void run();
    void stop();

private:
    void install_routes();
    const DeviceEntry* find_device(const std::string& name) const;

    std::shared_ptr<store::Store> store_;
    std::shared_ptr<Authenticator> auth_;
    ApiOptions options_;
    std::unique_ptr<httplib::Server> http_;
    std::thread thread_;
};

} // namespace pmon::api
