#include "doctest.h"

#include "pmon/config.hpp"

#include "json.hpp"

#include <fstream>

using namespace pmon;
using namespace pmon::config;
using nlohmann::json;

namespace {

std::string where_of(const json& doc)
{
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.where();
    }
    return "<accepted>";
}

json base()
{
    return json::parse(R"({
        "store_path": "/var/lib/pmon/pmon.store",
        "api": {"bind": "0.0.0.0:8080", "token_ttl_s": 3600},
        "poll": {"interval_ms": 1000, "timeout_ms": 500, "retries": 3},
        "devices": [
            {"name": "pm01", "unit": 1, "transport": "tcp://10.0.0.5:502"},
            {"name": "pm02", "unit": 2, "transport": "tcp://10.0.0.5:502",
             "register_map": {"energy": 32}, "serial": {"baud": 19200, "parity": "even"}}
        ],
        "sims": [{"unit": 1, "seed": 7, "listen": "127.0.0.1:15020", "admin": "127.0.0.1:15021"}]
    })");
}

} // namespace

TEST_CASE("a full config parses")
{
    const auto c = parse_config(base());
    CHECK(c.store_path == "/var/lib/pmon/pmon.store");
    CHECK(c.api_bind == "0.0.0.0:8080");
    CHECK(c.token_ttl == std::chrono::seconds{3600});
    REQUIRE(c.devices.size() == 2);
    CHECK(c.devices[1].register_map.start(MeasurementKind::Energy) == 32);
    CHECK(c.devices[1].register_map.start(MeasurementKind::Voltage) == 0);
    CHECK(c.devices[1].serial.baud == 19200);
    CHECK(c.devices[1].serial.parity == 'E');
    CHECK(c.devices[0].transport.port == 502);
    REQUIRE(c.sims.size() == 1);
    CHECK(c.sims[0].instance.settings.seed == 7);
    CHECK(c.sims[0].instance.settings.power_factor == 0.85);
}

TEST_CASE("omitted sections take their defaults")
{
    const auto c = parse_config(json::object());
    CHECK(c.poll.interval == std::chrono::milliseconds{1000});
    CHECK(c.poll.timeout == std::chrono::milliseconds{500});
    CHECK(c.poll.retries == 3);
    CHECK_FALSE(c.poll.bulk);
    CHECK(c.token_ttl == std::chrono::hours{12});
    CHECK(c.devices.empty());
}

TEST_CASE("the built-in default names one device on the local simulator")
{
    const auto c = default_config();
    REQUIRE(c.devices.size() == 1);
    CHECK(c.devices[0].name == "pm01");
    CHECK(c.devices[0].unit == 1);
    CHECK(c.devices[0].transport.to_string() == "tcp://127.0.0.1:15020");
    REQUIRE(c.sims.size() == 1);
    CHECK(c.sims[0].listen == "127.0.0.1:15020");
    CHECK_NOTHROW(validate(c));
}

TEST_CASE("errors point at the offending key")
{
    auto doc = base();
    doc["colour"] = "blue";
    CHECK(where_of(doc) == "/colour");

    doc = base();
    doc["devices"][1]["baudrate"] = 9600;
    CHECK(where_of(doc) == "/devices/1/baudrate");

    doc = base();
    doc["devices"][0]["unit"] = 0;
    CHECK(where_of(doc) == "/devices/0/unit");

    doc = base();
    doc["devices"][0]["unit"] = 248;
    CHECK(where_of(doc) == "/devices/0/unit");

    doc = base();
    doc["devices"][0].erase("unit");
    CHECK(where_of(doc) == "/devices/0/unit");

    doc = base();
    doc["devices"][0]["transport"] = "ftp://x";
    CHECK(where_of(doc) == "/devices/0/transport");

    doc = base();
    doc["devices"][0]["name"] = "pm 01";
    CHECK(where_of(doc) == "/devices/0/name");

    doc = base();
    doc["devices"][1]["register_map"] = {{"voltage", 2}};
    CHECK(where_of(doc) == "/devices/1/register_map");

    doc = base();
    doc["devices"][1]["register_map"] = {{"watts", 2}};
    CHECK(where_of(doc) == "/devices/1/register_map/watts");

    doc = base();
    doc["devices"][1]["serial"]["parity"] = "mark";
    CHECK(where_of(doc) == "/devices/1/serial/parity");

    doc = base();
    doc["poll"]["retries"] = "three";
    CHECK(where_of(doc) == "/poll/retries");

    doc = base();
    doc["sims"][0]["power_factor"] = 1.5;
    CHECK(where_of(doc) == "/sims/0/power_factor");

    doc = base();
    doc["api"]["bind"] = "everywhere";
    CHECK(where_of(doc) == "/api/bind");

    CHECK(where_of(json::array()) == "");
}

TEST_CASE("duplicates are rejected")
{
    auto doc = base();
    doc["devices"][1]["name"] = "pm01";
    CHECK(where_of(doc) == "/devices/1/name");

    doc = base();
    doc["devices"][1]["unit"] = 1;
    CHECK(where_of(doc) == "/devices/1/unit");

    // Same unit on different transports is fine.
    doc["devices"][1]["transport"] = "tcp://10.0.0.6:502";
    CHECK(where_of(doc) == "<accepted>");

    doc = base();
    doc["sims"].push_back({{"unit", 1}, {"listen", "127.0.0.1:15020"}});
    CHECK(where_of(doc) == "/sims/1/unit");
}

TEST_CASE("parity \"0\" reads as none")
{
    auto doc = base();
    doc["devices"][1]["serial"]["parity"] = "0";
    CHECK(parse_config(doc).devices[1].serial.parity == 'N');
}

TEST_CASE("to_json round trips")
{
    const auto c = parse_config(base());
    const auto again = parse_config(to_json(c));
    CHECK(to_json(again) == to_json(c));
    CHECK(again.devices[1].register_map == c.devices[1].register_map);
    CHECK(again.devices[1].serial == c.devices[1].serial);
}

TEST_CASE("missing files and bad json are config errors")
{
    CHECK_THROWS_AS(load_config("/nonexistent/pmon.json"), ConfigError);
    const auto path = std::filesystem::temp_directory_path() / "pmon-bad-config.json";
    std::ofstream(path) << "{ \"store_path\": ";
    CHECK_THROWS_AS(load_config(path), ConfigError);
    std::filesystem::remove(path);
}
