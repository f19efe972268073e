#include "pmon/api/server.hpp"

#include "pmon/api/records.hpp"
#include "pmon/log.hpp"

#include "httplib.h"
#include "json.hpp"

#include <charconv>
#include <system_error>

namespace pmon::api {

namespace {

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, int status, const std::string& message)
{
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}}.dump(), kJson);
}

std::optional<std::string> bearer_token(const httplib::Request& req)
{
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.size() <= prefix.size() || header.compare(0, prefix.size(), prefix) != 0)
        return std::nullopt;
    return header.substr(prefix.size());
}

} // namespace

ApiServer::ApiServer(std::shared_ptr<store::Store> store, std::shared_ptr<Authenticator> auth, ApiOptions options)
    : store_(std::move(store)), auth_(std::move(auth)), options_(std::move(options)),
      http_(std::make_unique<httplib::Server>())
{
    install_routes();
}

ApiServer::~ApiServer()
{
    stop();
}

const DeviceEntry* ApiServer::find_device(const std::string& name) const
{
    for (const auto& d : options_.devices)
        if (d.name == name)
            return &d;
    return nullptr;
}

void ApiServer::install_routes()
{
    auto& http = *http_;

    // httplib's default also sets SO_REUSEPORT, which lets a second server
    // share the port silently.
    http.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });

    // Everything except login and static assets is behind a session.
    http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (req.path.rfind("/api/", 0) != 0 || req.path == "/api/login")
            return httplib::Server::HandlerResponse::Unhandled;
        const auto token = bearer_token(req);
        if (!token || !auth_->validate(*token)) {
            res.set_header("WWW-Authenticate", "Bearer");
            send_error(res, 401, "unauthorized");
            return httplib::Server::HandlerResponse::Handled;
        }
        if (store_->mode() == store::Store::Mode::ReadOnly)
            store_->refresh();
        return httplib::Server::HandlerResponse::Unhandled;
    });

    http.Post("/api/login", [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("username") || !body.contains("password") ||
            !body["username"].is_string() || !body["password"].is_string()) {
            send_error(res, 400, "body must be {\"username\": string, \"password\": string}");
            return;
        }
        auto session = auth_->login(body["username"].get<std::string>(), body["password"].get<std::string>());
        if (!session) {
            send_error(res, 401, "invalid credentials");
            return;
        }
        res.set_content(nlohmann::json{{"token", session->token}, {"expires", format_iso(session->expiry)}}.dump(),
                        kJson);
    });

    http.Get("/api/devices", [this](const httplib::Request&, httplib::Response& res) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& d : options_.devices) {
            const auto seen = store_->last_sample_ts(d.name);
            out.push_back({{"name", d.name},
                           {"unit", d.unit},
                           {"last_seen", seen ? nlohmann::json(format_iso(*seen)) : nlohmann::json(nullptr)}});
        }
        res.set_content(out.dump(), kJson);
    });

    http.Get(R"(/api/devices/([^/]+)/latest)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto name = req.matches[1].str();
        if (!find_device(name)) {
            send_error(res, 404, "unknown device '" + name + "'");
            return;
        }
        std::optional<store::StoredRow> row;
        if (store_->has_device(name))
            row = store_->query_latest(name);
        if (!row) {
            res.status = 204;
            return;
        }
        res.set_content(latest_json(*row).dump(), kJson);
    });

    http.Get(R"(/api/devices/([^/]+)/records)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto name = req.matches[1].str();
        if (!find_device(name)) {
            send_error(res, 404, "unknown device '" + name + "'");
            return;
        }
        auto from = TimePoint::min();
        auto to = TimePoint::max();
        std::size_t limit = options_.default_limit;
        if (req.has_param("from")) {
            auto t = parse_time(req.get_param_value("from"));
            if (!t)
                return send_error(res, 400, "bad 'from' timestamp");
            from = *t;
        }
        if (req.has_param("to")) {
            auto t = parse_time(req.get_param_value("to"));
            if (!t)
                return send_error(res, 400, "bad 'to' timestamp");
            to = *t;
        }
        if (req.has_param("limit")) {
            const auto text = req.get_param_value("limit");
            long long v = 0;
            auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc{} || p != text.data() + text.size() || v < 1)
                return send_error(res, 400, "limit must be a positive integer");
            limit = std::min<std::size_t>(static_cast<std::size_t>(v), options_.max_limit);
        }
        if (from > to)
            return send_error(res, 400, "'from' is after 'to'");
        store::RangeResult result;
        if (store_->has_device(name))
            result = store_->query_range(name, from, to, limit, store::RowFilter::SamplesOnly);
        res.set_header("X-Truncated", result.truncated ? "true" : "false");
        res.set_content(records_json(name, result.rows), kJson);
    });

    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            log::error("api handler failed: {}", e.what());
        } catch (...) {
        }
        send_error(res, 500, "internal error");
    });

    if (!options_.static_dir.empty() && !http.set_mount_point("/", options_.static_dir))
        log::warn("static directory '{}' not found; dashboard assets not served", options_.static_dir);
}

std::uint16_t ApiServer::bind(const std::string& host, std::uint16_t port)
{
    int bound;
    if (port == 0) {
        bound = http_->bind_to_any_port(host);
    } else {
        bound = http_->bind_to_port(host, port) ? port : -1;
    }
    if (bound <= 0)
        throw std::system_error(std::make_error_code(std::errc::address_in_use),
                                "cannot bind API to " + host + ":" + std::to_string(port));
    return static_cast<std::uint16_t>(bound);
}

void ApiServer::start()
{
    thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
}

void ApiServer::run()
{
    http_->listen_after_bind();
}

void ApiServer::stop()
{
    if (http_)
        http_->stop();
    if (thread_.joinable())
        thread_.join();
}

} // namespace pmon::api
