#include "doctest.h"

#include "../fixtures.hpp"
#include "pmon/api/auth.hpp"
#include "pmon/api/records.hpp"
#include "pmon/api/server.hpp"

#include "httplib.h"
#include "json.hpp"

#include <openssl/evp.h>

using namespace pmon;
using namespace pmon::api;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::string hex(const unsigned char* p, std::size_t n)
{
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        out += digits[p[i] >> 4];
        out += digits[p[i] & 15];
    }
    return out;
}

struct FakeClock {
    TimePoint now = from_millis(1'700'000'000'000);
    TimePoint operator()() const { return now; }
};

struct Server {
    std::filesystem::path path = test::temp_path("pmon-api");
    std::shared_ptr<store::Store> st;
    std::shared_ptr<FakeClock> clock = std::make_shared<FakeClock>();
    std::shared_ptr<Authenticator> auth;
    std::unique_ptr<ApiServer> api;
    std::uint16_t port = 0;

    explicit Server(bool fixture = true, std::size_t max_limit = 10000)
    {
        st = std::make_shared<store::Store>(path, store::Store::Mode::ReadWrite);
        if (fixture)
            test::write_three_row_store(*st);
        auth = std::make_shared<Authenticator>(std::vector{make_auth_record("admin", "s3cret", 1000)}, 12h,
                                               [c = clock] { return c->now; });
        ApiOptions opts;
        opts.devices = {{"pm01", 1}, {"pm02", 2}};
        opts.max_limit = max_limit;
        api = std::make_unique<ApiServer>(st, auth, opts);
        port = api->bind("127.0.0.1", 0);
        api->start();
    }
    ~Server()
    {
        api->stop();
        std::filesystem::remove(path);
    }
    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(5, 0);
        return c;
    }
    std::string login()
    {
        auto c = client();
        auto res = c.Post("/api/login", R"({"username":"admin","password":"s3cret"})", "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        return json::parse(res->body).at("token").get<std::string>();
    }
    httplib::Result get(const std::string& path, const std::string& token)
    {
        auto c = client();
        return c.Get(path, {{"Authorization", "Bearer " + token}});
    }
};

} // namespace

TEST_CASE("stored hashes are PBKDF2-HMAC-SHA256")
{
    const auto rec = make_auth_record("u", "pw", 2000);
    CHECK(rec.iterations == 2000);
    CHECK(rec.password_hash.size() == 64);
    CHECK(rec.password_hash.find("pw") == std::string::npos);
    // Recompute independently from the salt.
    std::vector<unsigned char> salt;
    for (std::size_t i = 0; i < rec.salt.size(); i += 2)
        salt.push_back(static_cast<unsigned char>(std::stoi(rec.salt.substr(i, 2), nullptr, 16)));
    unsigned char out[32];
    REQUIRE(PKCS5_PBKDF2_HMAC("pw", 2, salt.data(), static_cast<int>(salt.size()), 2000, EVP_sha256(), 32, out) == 1);
    CHECK(hex(out, 32) == rec.password_hash);
    CHECK(make_auth_record("u", "pw", 2000).salt != rec.salt);
}

TEST_CASE("tokens are 32 random bytes in base64url")
{
    const auto a = random_token(), b = random_token();
    CHECK(a.size() == 43);
    CHECK(a != b);
    CHECK(a.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_") == std::string::npos);
    const unsigned char bytes[] = {0xfb, 0xff, 0x00};
    CHECK(base64url(bytes, 3) == "-_8A");
}

TEST_CASE("authenticator issues, validates and expires sessions")
{
    FakeClock clock;
    Authenticator auth({make_auth_record("admin", "pw", 1000)}, 3600s, [&] { return clock.now; });
    CHECK_FALSE(auth.login("admin", "wrong"));
    CHECK_FALSE(auth.login("nobody", "pw"));
    auto s = auth.login("admin", "pw");
    REQUIRE(s);
    CHECK(s->expiry == clock.now + 3600s);
    CHECK(auth.validate(s->token));
    CHECK_FALSE(auth.validate("forged"));
    clock.now += 3599s;
    CHECK(auth.validate(s->token));
    clock.now += 1s;
    CHECK_FALSE(auth.validate(s->token));
    CHECK(auth.live_sessions() == 0);
}

TEST_CASE("legacy numbers are the shortest spelling with a decimal point")
{
    CHECK(legacy_number(220.0f) == "220.0");
    CHECK(legacy_number(49.99f) == "49.99");
    CHECK(legacy_number(0.85f) == "0.85");
    CHECK(legacy_number(0.0f) == "0.0");
    CHECK(legacy_number(2618.0f) == "2618.0");
    CHECK(legacy_number(-1.5f) == "-1.5");
    CHECK(json_number(0.85f) == 0.85);
}

TEST_CASE("login answers")
{
    Server srv;
    auto c = srv.client();
    auto ok = c.Post("/api/login", R"({"username":"admin","password":"s3cret"})", "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    const auto body = json::parse(ok->body);
    CHECK(body.at("token").get<std::string>().size() == 43);
    CHECK(body.at("expires") == format_iso(srv.clock->now + 12h));

    auto wrong_pw = c.Post("/api/login", R"({"username":"admin","password":"nope"})", "application/json");
    auto no_user = c.Post("/api/login", R"({"username":"ghost","password":"s3cret"})", "application/json");
    REQUIRE(wrong_pw);
    REQUIRE(no_user);
    CHECK(wrong_pw->status == 401);
    CHECK(no_user->status == 401);
    CHECK(wrong_pw->body == no_user->body);

    for (const char* bad : {"", "[]", "{}", R"({"username":"admin"})", R"({"username":1,"password":"x"})", "{not json"}) {
        auto r = c.Post("/api/login", bad, "application/json");
        REQUIRE(r);
        CHECK(r->status == 400);
    }
}

TEST_CASE("every data route needs a live token")
{
    Server srv;
    const auto token = srv.login();
    const std::vector<std::string> routes{"/api/devices", "/api/devices/pm01/latest", "/api/devices/pm01/records",
                                          "/api/devices/nope/latest"};
    for (const auto& route : routes) {
        auto c = srv.client();
        auto none = c.Get(route);
        REQUIRE(none);
        CHECK(none->status == 401);
        CHECK(json::parse(none->body) == json{{"error", "unauthorized"}});
        auto junk = srv.get(route, "not-a-token");
        REQUIRE(junk);
        CHECK(junk->status == 401);
        auto ok = srv.get(route, token);
        REQUIRE(ok);
        CHECK(ok->status != 401);
    }
    srv.clock->now += 12h;
    auto expired = srv.get("/api/devices", token);
    REQUIRE(expired);
    CHECK(expired->status == 401);
}

TEST_CASE("devices lists configured devices with last_seen")
{
    Server srv;
    const auto token = srv.login();
    auto res = srv.get("/api/devices", token);
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const auto body = json::parse(res->body);
    REQUIRE(body.size() == 2);
    CHECK(body[0] == json{{"name", "pm01"}, {"unit", 1}, {"last_seen", "2026-01-15T10:00:02.000Z"}});
    CHECK(body[1].at("last_seen").is_null());
}

TEST_CASE("latest returns numbers, 204 before any sample, 404 for strangers")
{
    Server srv;
    const auto token = srv.login();
    auto res = srv.get("/api/devices/pm01/latest", token);
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const auto body = json::parse(res->body);
    CHECK(body.at("voltage") == 221.25);
    CHECK(body.at("power_factor") == 0.85);
    CHECK(body.at("id") == 3);
    CHECK(body.at("device") == "pm01");
    CHECK(body.at("ts") == "2026-01-15T10:00:02.000Z");

    auto none = srv.get("/api/devices/pm02/latest", token);
    REQUIRE(none);
    CHECK(none->status == 204);
    srv.st->append(GapEvent{"pm02", from_millis(5), GapReason::Timeout, 0});
    none = srv.get("/api/devices/pm02/latest", token);
    CHECK(none->status == 204);

    auto missing = srv.get("/api/devices/pm99/latest", token);
    REQUIRE(missing);
    CHECK(missing->status == 404);
}

TEST_CASE("records matches the golden file byte for byte")
{
    Server srv;
    const auto token = srv.login();
    auto res = srv.get("/api/devices/pm01/records", token);
    REQUIRE(res);
    REQUIRE(res->status == 200);
    CHECK(res->get_header_value("X-Truncated") == "false");
    CHECK(res->get_header_value("Content-Type") == "application/json");
    const auto golden = test::read_text(std::filesystem::path(PMON_GOLDEN_DIR) / "records_3row.json");
    REQUIRE_FALSE(golden.empty());
    CHECK(res->body == golden);

    const auto doc = json::parse(res->body);
    REQUIRE(doc.is_object());
    REQUIRE(doc.size() == 1);
    REQUIRE(doc.at("pm01").is_array());
    for (const auto& row : doc.at("pm01"))
        for (const auto& [k, v] : row.items())
            CHECK_MESSAGE(v.is_string(), k);
}

TEST_CASE("records parse and serialise back to the same bytes")
{
    const auto golden = test::read_text(std::filesystem::path(PMON_GOLDEN_DIR) / "records_3row.json");
    auto [device, rows] = parse_records_json(golden);
    CHECK(device == "pm01");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].sample().values.frequency == 49.98f);
    CHECK(records_json(device, rows) == golden);

    CHECK_THROWS_AS(parse_records_json("[]"), std::invalid_argument);
    CHECK_THROWS_AS(parse_records_json(R"({"a":[],"b":[]})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_records_json(R"({"pm01":{}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_records_json(R"({"pm01":[{"id":1}]})"), std::invalid_argument);
}

TEST_CASE("records range, limit and truncation")
{
    Server srv;
    const auto token = srv.login();
    auto sub = srv.get("/api/devices/pm01/records?from=2026-01-15T10:00:01.000Z&to=2026-01-15T10:00:02.000Z", token);
    REQUIRE(sub);
    CHECK(json::parse(sub->body).at("pm01").size() == 2);

    auto ms = srv.get("/api/devices/pm01/records?from=1768471200000&to=1768471200000", token);
    CHECK(json::parse(ms->body).at("pm01").size() == 1);

    auto limited = srv.get("/api/devices/pm01/records?limit=2", token);
    REQUIRE(limited);
    CHECK(limited->get_header_value("X-Truncated") == "true");
    const auto rows = json::parse(limited->body).at("pm01");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].at("id") == "1");
    CHECK(rows[1].at("id") == "2");

    auto empty = srv.get("/api/devices/pm01/records?from=2030-01-01T00:00:00Z", token);
    REQUIRE(empty);
    CHECK(empty->status == 200);
    CHECK(empty->body == R"({"pm01":[]})");

    auto quiet = srv.get("/api/devices/pm02/records", token);
    CHECK(quiet->body == R"({"pm02":[]})");

    for (const char* bad : {"?from=yesterday", "?to=x", "?limit=0", "?limit=-3", "?limit=ten",
                            "?from=2026-01-15T10:00:02Z&to=2026-01-15T10:00:01Z"}) {
        auto r = srv.get(std::string("/api/devices/pm01/records") + bad, token);
        REQUIRE(r);
        CHECK_MESSAGE(r->status == 400, bad);
    }
    auto missing = srv.get("/api/devices/pm99/records", token);
    CHECK(missing->status == 404);
}

TEST_CASE("records limit is capped by the server maximum")
{
    Server srv(true, 2);
    const auto token = srv.login();
    auto res = srv.get("/api/devices/pm01/records?limit=1000", token);
    REQUIRE(res);
    CHECK(json::parse(res->body).at("pm01").size() == 2);
    CHECK(res->get_header_value("X-Truncated") == "true");
}

TEST_CASE("records skip gap events")
{
    Server srv;
    srv.st->append(GapEvent{"pm01", from_millis(1768471203000), GapReason::Timeout, 0});
    srv.st->append(Sample{"pm01", from_millis(1768471204000), {220.0f, 14.0f, 50.0f, 0.85f, 2618.0f, 1.6f}});
    const auto token = srv.login();
    auto res = srv.get("/api/devices/pm01/records", token);
    const auto rows = json::parse(res->body).at("pm01");
    REQUIRE(rows.size() == 4);
    CHECK(rows[3].at("id") == "5");
}

TEST_CASE("a read-only server sees rows written by another handle")
{
    const auto path = test::temp_path("pmon-api-ro");
    {
        store::Store writer(path, store::Store::Mode::ReadWrite);
        auto reader = std::make_shared<store::Store>(path, store::Store::Mode::ReadOnly);
        auto auth = std::make_shared<Authenticator>(std::vector{make_auth_record("a", "b", 1000)});
        ApiServer api(reader, auth, ApiOptions{.devices = {{"pm01", 1}}});
        const auto port = api.bind("127.0.0.1", 0);
        api.start();
        httplib::Client c("127.0.0.1", port);
        const auto token = json::parse(c.Post("/api/login", R"({"username":"a","password":"b"})", "application/json")->body)
                               .at("token")
                               .get<std::string>();
        httplib::Headers h{{"Authorization", "Bearer " + token}};
        CHECK(c.Get("/api/devices/pm01/latest", h)->status == 204);
        test::write_three_row_store(writer);
        CHECK(c.Get("/api/devices/pm01/latest", h)->status == 200);
        api.stop();
    }
    std::filesystem::remove(path);
}

TEST_CASE("binding a taken port fails")
{
    Server srv;
    auto other = std::make_unique<ApiServer>(srv.st, srv.auth, ApiOptions{});
    CHECK_THROWS_AS(other->bind("127.0.0.1", srv.port), std::system_error);
}
