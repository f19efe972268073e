#include "pmon/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <map>
#include <set>

namespace pmon::config {

using nlohmann::json;

ConfigError::ConfigError(std::string where, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", where.empty() ? "/" : where, message)), where_(std::move(where))
{
}

namespace {

class Reader {
public:
    Reader(const json& node, std::string where) : node_(node), where_(std::move(where))
    {
        if (!node_.is_object())
            throw ConfigError(where_, "expected an object");
    }

    // Every key must be one of `allowed`.
    void only(std::initializer_list<std::string_view> allowed) const
    {
        for (const auto& [key, value] : node_.items()) {
            bool known = false;
            for (auto a : allowed)
                known = known || key == a;
            if (!known)
                throw ConfigError(where_ + "/" + key, "unknown key");
        }
    }

    const json* get(const std::string& key) const
    {
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    std::string path(const std::string& key) const { return where_ + "/" + key; }

    template <typename T>
    void integer(const std::string& key, T& out, long long lo, long long hi) const
    {
        if (const auto* v = get(key)) {
            if (!v->is_number_integer())
                throw ConfigError(path(key), "expected an integer");
            const auto x = v->get<long long>();
            if (x < lo || x > hi)
                throw ConfigError(path(key), fmt::format("must be in [{}, {}]", lo, hi));
            out = static_cast<T>(x);
        }
    }

    void number(const std::string& key, double& out, double lo, double hi) const
    {
        if (const auto* v = get(key)) {
            if (!v->is_number())
                throw ConfigError(path(key), "expected a number");
            const auto x = v->get<double>();
            if (!(x >= lo && x <= hi))
                throw ConfigError(path(key), fmt::format("must be in [{}, {}]", lo, hi));
            out = x;
        }
    }

    void string(const std::string& key, std::string& out, bool required = false) const
    {
        const auto* v = get(key);
        if (!v) {
            if (required)
                throw ConfigError(path(key), "required");
            return;
        }
        if (!v->is_string())
            throw ConfigError(path(key), "expected a string");
        out = v->get<std::string>();
    }

    void boolean(const std::string& key, bool& out) const
    {
        if (const auto* v = get(key)) {
            if (!v->is_boolean())
                throw ConfigError(path(key), "expected true or false");
            out = v->get<bool>();
        }
    }

    const json& array(const std::string& key) const
    {
        static const json empty = json::array();
        const auto* v = get(key);
        if (!v)
            return empty;
        if (!v->is_array())
            throw ConfigError(path(key), "expected an array");
        return *v;
    }

private:
    const json& node_;
    std::string where_;
};

transport::SerialSettings parse_serial(const json& node, const std::string& where)
{
    Reader r(node, where);
    r.only({"baud", "parity", "data_bits", "stop_bits"});
    transport::SerialSettings s;
    r.integer("baud", s.baud, 300, 115200);
    std::string parity = "none";
    r.string("parity", parity);
    if (parity == "none" || parity == "0")
        s.parity = 'N';
    else if (parity == "even")
        s.parity = 'E';
    else if (parity == "odd")
        s.parity = 'O';
    else
        throw ConfigError(r.path("parity"), "expected none, even or odd");
    r.integer("data_bits", s.data_bits, 7, 8);
    r.integer("stop_bits", s.stop_bits, 1, 2);
    return s;
}

std::string parity_name(char p)
{
    return p == 'E' ? "even" : p == 'O' ? "odd" : "none";
}

gateway::DeviceConfig parse_device(const json& node, const std::string& where)
{
    Reader r(node, where);
    r.only({"name", "unit", "transport", "register_map", "serial"});
    gateway::DeviceConfig d;
    r.string("name", d.name, true);
    if (d.name.empty() || d.name.size() > 64)
        throw ConfigError(r.path("name"), "must be 1..64 characters");
    for (char c : d.name)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
            throw ConfigError(r.path("name"), "only letters, digits, '_' and '-' are allowed");
    if (!r.get("unit"))
        throw ConfigError(r.path("unit"), "required");
    r.integer("unit", d.unit, 1, 247);
    std::string transport;
    r.string("transport", transport, true);
    try {
        d.transport = transport::parse_endpoint(transport);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(r.path("transport"), e.what());
    }
    if (const auto* map = r.get("register_map")) {
        Reader m(*map, r.path("register_map"));
        for (const auto& [key, value] : map->items()) {
            const auto kind = kind_from_name(key);
            if (!kind)
                throw ConfigError(m.path(key), "unknown quantity");
            std::uint16_t address = 0;
            m.integer(key, address, 0, 0xFFFE);
            d.register_map.set_start(*kind, address);
        }
        if (!d.register_map.valid())
            throw ConfigError(r.path("register_map"), "register blocks overlap");
    }
    if (const auto* serial = r.get("serial"))
        d.serial = parse_serial(*serial, r.path("serial"));
    return d;
}

SimEntry parse_sim(const json& node, const std::string& where)
{
    Reader r(node, where);
    r.only({"unit", "seed", "power_factor", "load_current", "initial_energy", "tick_ms", "listen", "admin"});
    SimEntry s;
    auto& st = s.instance.settings;
    r.integer("unit", st.unit, 1, 247);
    r.integer("seed", st.seed, 0, std::numeric_limits<long long>::max());
    r.number("power_factor", st.power_factor, 0.01, 1.0);
    r.number("load_current", st.load_current, 0.0, 1000.0);
    r.number("initial_energy", st.initial_energy, 0.0, 1e9);
    long long tick = s.instance.tick_period.count();
    r.integer("tick_ms", tick, 0, 3'600'000);
    s.instance.tick_period = transport::milliseconds{tick};
    r.string("listen", s.listen, true);
    r.string("admin", s.admin);
    try {
        transport::parse_host_port(s.listen);
        if (!s.admin.empty())
            transport::parse_host_port(s.admin);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where, e.what());
    }
    return s;
}

api::AuthRecord parse_user(const json& node, const std::string& where)
{
    Reader r(node, where);
    r.only({"username", "password_hash", "salt", "iterations"});
    api::AuthRecord u;
    r.string("username", u.username, true);
    r.string("password_hash", u.password_hash, true);
    r.string("salt", u.salt, true);
    r.integer("iterations", u.iterations, 1000, 10'000'000);
    auto is_hex = [](const std::string& s) {
        return !s.empty() && s.size() % 2 == 0 && s.find_first_not_of("0123456789abcdefABCDEF") == std::string::npos;
    };
    if (!is_hex(u.password_hash))
        throw ConfigError(r.path("password_hash"), "expected hex");
    if (!is_hex(u.salt))
        throw ConfigError(r.path("salt"), "expected hex");
    return u;
}

} // namespace

Config default_config()
{
    Config c;
    gateway::DeviceConfig d;
    d.name = "pm01";
    d.unit = 1;
    d.transport = transport::parse_endpoint("tcp://127.0.0.1:15020");
    c.devices.push_back(d);
    SimEntry s;
    s.listen = "127.0.0.1:15020";
    s.admin = "127.0.0.1:15021";
    c.sims.push_back(s);
    return c;
}

Config parse_config(const json& doc)
{
    Reader root(doc, "");
    root.only({"store_path", "api", "poll", "devices", "users", "sims"});
    Config c;
    root.string("store_path", c.store_path);
    if (const auto* api = root.get("api")) {
        Reader r(*api, "/api");
        r.only({"bind", "token_ttl_s", "static_dir"});
        r.string("bind", c.api_bind);
        try {
            transport::parse_host_port(c.api_bind);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("/api/bind", e.what());
        }
        long long ttl = c.token_ttl.count();
        r.integer("token_ttl_s", ttl, 1, 30LL * 24 * 3600);
        c.token_ttl = std::chrono::seconds{ttl};
        r.string("static_dir", c.static_dir);
    }
    if (const auto* poll = root.get("poll")) {
        Reader r(*poll, "/poll");
        r.only({"interval_ms", "timeout_ms", "retries", "bulk"});
        long long interval = c.poll.interval.count(), timeout = c.poll.timeout.count();
        r.integer("interval_ms", interval, 10, 3'600'000);
        r.integer("timeout_ms", timeout, 1, 60'000);
        r.integer("retries", c.poll.retries, 1, 10);
        r.boolean("bulk", c.poll.bulk);
        c.poll.interval = transport::milliseconds{interval};
        c.poll.timeout = transport::milliseconds{timeout};
    }
    const auto& devices = root.array("devices");
    for (std::size_t i = 0; i < devices.size(); ++i)
        c.devices.push_back(parse_device(devices[i], fmt::format("/devices/{}", i)));
    const auto& users = root.array("users");
    for (std::size_t i = 0; i < users.size(); ++i)
        c.users.push_back(parse_user(users[i], fmt::format("/users/{}", i)));
    const auto& sims = root.array("sims");
    for (std::size_t i = 0; i < sims.size(); ++i)
        c.sims.push_back(parse_sim(sims[i], fmt::format("/sims/{}", i)));
    validate(c);
    return c;
}

void validate(const Config& c)
{
    std::set<std::string> names;
    std::map<std::string, std::set<int>> units_by_transport;
    for (std::size_t i = 0; i < c.devices.size(); ++i) {
        const auto& d = c.devices[i];
        if (!names.insert(d.name).second)
            throw ConfigError(fmt::format("/devices/{}/name", i), "duplicate device name '" + d.name + "'");
        if (!units_by_transport[d.transport.to_string()].insert(d.unit).second)
            throw ConfigError(fmt::format("/devices/{}/unit", i),
                              fmt::format("unit {} already used on {}", d.unit, d.transport.to_string()));
    }
    std::map<std::string, std::set<int>> units_by_listener;
    for (std::size_t i = 0; i < c.sims.size(); ++i) {
        const auto& s = c.sims[i];
        if (!units_by_listener[s.listen].insert(s.instance.settings.unit).second)
            throw ConfigError(fmt::format("/sims/{}/unit", i),
                              fmt::format("unit {} already served on {}", s.instance.settings.unit, s.listen));
    }
    std::set<std::string> users;
    for (std::size_t i = 0; i < c.users.size(); ++i)
        if (!users.insert(c.users[i].username).second)
            throw ConfigError(fmt::format("/users/{}/username", i), "duplicate user");
}

Config load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("", "cannot read " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

json to_json(const Config& c)
{
    json devices = json::array();
    for (const auto& d : c.devices) {
        json map;
        for (auto kind : kAllKinds)
            map[std::string(name_of(kind))] = d.register_map.start(kind);
        devices.push_back({{"name", d.name},
                           {"unit", d.unit},
                           {"transport", d.transport.to_string()},
                           {"register_map", map},
                           {"serial",
                            {{"baud", d.serial.baud},
                             {"parity", parity_name(d.serial.parity)},
                             {"data_bits", d.serial.data_bits},
                             {"stop_bits", d.serial.stop_bits}}}});
    }
    json users = json::array();
    for (const auto& u : c.users)
        users.push_back({{"username", u.username},
                         {"password_hash", u.password_hash},
                         {"salt", u.salt},
                         {"iterations", u.iterations}});
    json sims = json::array();
    for (const auto& s : c.sims) {
        const auto& st = s.instance.settings;
        json j{{"unit", st.unit},
               {"seed", st.seed},
               {"power_factor", st.power_factor},
               {"load_current", st.load_current},
               {"initial_energy", st.initial_energy},
               {"tick_ms", s.instance.tick_period.count()},
               {"listen", s.listen}};
        if (!s.admin.empty())
            j["admin"] = s.admin;
        sims.push_back(j);
    }
    return {
        {"store_path", c.store_path},
        {"api", {{"bind", c.api_bind}, {"token_ttl_s", c.token_ttl.count()}, {"static_dir", c.static_dir}}},
        {"poll",
         {{"interval_ms", c.poll.interval.count()},
          {"timeout_ms", c.poll.timeout.count()},
          {"retries", c.poll.retries},
          {"bulk", c.poll.bulk}}},
        {"devices", devices},
        {"users", users},
        {"sims", sims},
    };
}

} // namespace pmon::config
