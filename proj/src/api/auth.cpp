#include "pmon/api/auth.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <stdexcept>

#include <fmt/format.h>

namespace pmon::api {

namespace {

std::string to_hex(const unsigned char* data, std::size_t size)
{
    std::string out;
    out.reserve(2 * size);
    for (std::size_t i = 0; i < size; ++i)
        out += fmt::format("{:02x}", data[i]);
    return out;
}

std::vector<unsigned char> from_hex(const std::string& hex)
{
    if (hex.size() % 2)
        throw std::invalid_argument("odd-length hex string");
    std::vector<unsigned char> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<unsigned char>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
    return out;
}

std::vector<unsigned char> derive(const std::string& password, const std::vector<unsigned char>& salt, int iterations)
{
    std::vector<unsigned char> key(32);
    if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt.data(),
                          static_cast<int>(salt.size()), iterations, EVP_sha256(), static_cast<int>(key.size()),
                          key.data()) != 1)
        throw std::runtime_error("PBKDF2 failed");
    return key;
}

std::vector<unsigned char> random_bytes(std::size_t n)
{
    std::vector<unsigned char> out(n);
    if (RAND_bytes(out.data(), static_cast<int>(n)) != 1)
        throw std::runtime_error("no randomness available");
    return out;
}

} // namespace

std::string base64url(const unsigned char* data, std::size_t size)
{
    std::string out(4 * ((size + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data, static_cast<int>(size));
    out.resize(static_cast<std::size_t>(n));
    while (!out.empty() && out.back() == '=')
        out.pop_back();
    for (char& c : out) {
        if (c == '+')
            c = '-';
        else if (c == '/')
            c = '_';
    }
    return out;
}

std::string random_token(std::size_t bytes)
{
    const auto raw = random_bytes(bytes);
    return base64url(raw.data(), raw.size());
}

AuthRecord make_auth_record(const std::string& username, const std::string& password, int iterations)
{
    const auto salt = random_bytes(16);
    const auto key = derive(password, salt, iterations);
    return AuthRecord{username, to_hex(key.data(), key.size()), to_hex(salt.data(), salt.size()), iterations};
}

Authenticator::Authenticator(std::vector<AuthRecord> users, std::chrono::seconds ttl, ClockFn clock)
    : users_(std::move(users)), ttl_(ttl), clock_(std::move(clock))
{
    const int iterations = users_.empty() ? 60000 : users_.front().iterations;
    decoy_ = make_auth_record("", random_token(16), iterations);
}

std::optional<SessionToken> Authenticator::login(const std::string& username, const std::string& password)
{
    const AuthRecord* match = &decoy_;
    for (const auto& u : users_)
        if (u.username == username)
            match = &u;
    const auto expected = from_hex(match->password_hash);
    const auto got = derive(password, from_hex(match->salt), match->iterations);
    const bool equal = expected.size() == got.size() && CRYPTO_memcmp(expected.data(), got.data(), got.size()) == 0;
    if (!equal || match == &decoy_)
        return std::nullopt;

    SessionToken session{random_token(32), clock_() + ttl_};
    std::lock_guard lock(mutex_);
    const auto now = clock_();
    std::erase_if(sessions_, [&](const auto& kv) { return kv.second <= now; });
    sessions_[session.token] = session.expiry;
    return session;
}

bool Authenticator::validate(const std::string& token)
{
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(token);
    if (it == sessions_.end())
        return false;
    if (it->second <= clock_()) {
        sessions_.erase(it);
        return false;
    }
    return true;
}

std::size_t Authenticator::live_sessions()
{
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

} // namespace pmon::api
