#pragma once

#include "pmon/time.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pmon::api {

// Stored credential: PBKDF2-HMAC-SHA256 of the password under a random salt.
// Plaintext passwords are never kept.
struct AuthRecord {
    std::string username;
    std::string password_hash; // hex
    std::string salt;          // hex
    int iterations = 60000;
};

AuthRecord make_auth_record(const std::string& username, const std::string& password, int iterations = 60000);

struct SessionToken {
    std::string token; // 32 random bytes, base64url without padding
    TimePoint expiry;
};

class Authenticator {
public:
    using ClockFn = std::function<TimePoint()>;

    explicit Authenticator(std::vector<AuthRecord> users, std::chrono::seconds ttl = std::chrono::hours{12},
                           ClockFn clock = now_utc);

    // Same work and the same answer shape whether the user is unknown or
    // the password is wrong.
    std::optional<SessionToken> login(const std::string& username, const std::string& password);
    bool validate(const std::string& token);
    std::size_t live_sessions();

private:
    std::vector<AuthRecord> users_;
    AuthRecord decoy_;
    std::chrono::seconds ttl_;
    ClockFn clock_;
    std::mutex mutex_;
    std::map<std::string, TimePoint> sessions_;
};

std::string random_token(std::size_t bytes = 32);
std::string base64url(const unsigned char* data, std::size_t size);

} // namespace pmon::api
