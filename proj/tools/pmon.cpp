// pmon: simulator, gateway, API server, demo and store queries in one binary.
//
// Exit status: 0 success, 1 usage or config error, 2 runtime failure.

#include "pmon/api/auth.hpp"
#include "pmon/api/records.hpp"
#include "pmon/api/server.hpp"
#include "pmon/app/demo.hpp"
#include "pmon/config.hpp"
#include "pmon/gateway/gateway.hpp"
#include "pmon/log.hpp"
#include "pmon/sim/host.hpp"
#include "pmon/store/store.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fmt/format.h>

#include <csignal>
#include <iostream>
#include <map>
#include <thread>

using namespace pmon;
using namespace std::chrono_literals;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFatal = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// SIGINT/SIGTERM are blocked in every thread and collected here instead.
class SignalWatcher {
public:
    SignalWatcher()
    {
        sigemptyset(&set_);
        sigaddset(&set_, SIGINT);
        sigaddset(&set_, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &set_, nullptr);
        thread_ = std::jthread([this](std::stop_token st) {
            const timespec poll{0, 200'000'000};
            while (!st.stop_requested()) {
                const int sig = sigtimedwait(&set_, nullptr, &poll);
                if (sig == SIGINT || sig == SIGTERM) {
                    log::info("signal={} stopping", sig == SIGINT ? "SIGINT" : "SIGTERM");
                    source_.request_stop();
                }
            }
        });
    }
    std::stop_token token() const { return source_.get_token(); }

    // Blocks until a signal arrives or `limit` passes.
    void wait(std::optional<std::chrono::milliseconds> limit = std::nullopt)
    {
        std::mutex m;
        std::condition_variable_any cv;
        std::unique_lock lock(m);
        auto tok = token();
        if (limit)
            cv.wait_for(lock, tok, *limit, [] { return false; });
        else
            cv.wait(lock, tok, [] { return false; });
    }

private:
    sigset_t set_;
    std::stop_source source_;
    std::jthread thread_;
};

config::Config load(const std::string& path)
{
    return path.empty() ? config::default_config() : config::load_config(path);
}

std::vector<api::AuthRecord> users_from(const config::Config& cfg, const std::string& user,
                                        const std::string& password)
{
    auto users = cfg.users;
    if (!user.empty() || !password.empty()) {
        if (user.empty() || password.empty())
            throw UsageError("--user and --password go together");
        std::erase_if(users, [&](const auto& u) { return u.username == user; });
        users.push_back(api::make_auth_record(user, password));
    }
    return users;
}

// Accepts "NAME:UNIT@ENDPOINT", e.g. "pm01:1@tcp://127.0.0.1:15020".
gateway::DeviceConfig parse_device_flag(const std::string& text)
{
    const auto colon = text.find(':');
    const auto at = text.find('@');
    if (colon == std::string::npos || at == std::string::npos || at < colon)
        throw UsageError("--device expects NAME:UNIT@ENDPOINT, got '" + text + "'");
    gateway::DeviceConfig d;
    d.name = text.substr(0, colon);
    try {
        const int unit = std::stoi(text.substr(colon + 1, at - colon - 1));
        if (unit < 1 || unit > 247)
            throw std::out_of_range("unit");
        d.unit = static_cast<std::uint8_t>(unit);
        d.transport = transport::parse_endpoint(text.substr(at + 1));
    } catch (const std::invalid_argument& e) {
        throw UsageError("--device '" + text + "': " + e.what());
    } catch (const std::out_of_range&) {
        throw UsageError("--device '" + text + "': unit must be 1..247");
    }
    return d;
}

sim::FaultKind parse_fault_kind(const std::string& name)
{
    auto kind = sim::fault_from_name(name);
    if (!kind)
        throw UsageError("unknown fault '" + name + "' (fuse_blown, voltage_sag, pump_off, restore)");
    return *kind;
}

// "fuse_blown@30" -> fuse_blown at 30 s.
app::ScheduledFault parse_fault_flag(const std::string& text)
{
    const auto at = text.find('@');
    if (at == std::string::npos)
        throw UsageError("--fault expects KIND@SECONDS, got '" + text + "'");
    app::ScheduledFault f;
    f.fault = parse_fault_kind(text.substr(0, at));
    try {
        std::size_t used = 0;
        const double s = std::stod(text.substr(at + 1), &used);
        if (used != text.size() - at - 1 || s < 0)
            throw std::invalid_argument("seconds");
        f.at = std::chrono::milliseconds{static_cast<long long>(s * 1000)};
    } catch (const std::exception&) {
        throw UsageError("--fault '" + text + "': bad time");
    }
    return f;
}

// ---- sim ------------------------------------------------------------------

struct SimArgs {
    std::optional<int> unit;
    std::string listen;
    std::string admin;
    std::optional<std::uint64_t> seed;
    std::optional<double> power_factor;
    std::optional<int> tick_ms;
};

int cmd_sim(const std::string& config_path, const SimArgs& a)
{
    auto cfg = load(config_path);
    if (a.unit || !a.listen.empty()) {
        config::SimEntry s;
        if (!cfg.sims.empty())
            s = cfg.sims.front();
        cfg.sims = {s};
    }
    if (cfg.sims.empty())
        throw UsageError("no simulators configured");
    for (auto& s : cfg.sims) {
        if (a.unit)
            s.instance.settings.unit = static_cast<std::uint8_t>(*a.unit);
        if (!a.listen.empty())
            s.listen = a.listen;
        if (!a.admin.empty())
            s.admin = a.admin;
        if (a.seed)
            s.instance.settings.seed = *a.seed;
        if (a.power_factor)
            s.instance.settings.power_factor = *a.power_factor;
        if (a.tick_ms)
            s.instance.tick_period = std::chrono::milliseconds{*a.tick_ms};
    }
    config::validate(cfg);

    // One bus per listen address; several units may share it.
    std::map<std::string, std::vector<const config::SimEntry*>> by_listener;
    for (const auto& s : cfg.sims)
        by_listener[s.listen].push_back(&s);

    SignalWatcher signals;
    std::vector<std::unique_ptr<sim::SimHost>> hosts;
    std::vector<std::unique_ptr<sim::TcpBridge>> bridges;
    std::vector<std::unique_ptr<sim::AdminServer>> admins;
    const auto epoch = transport::Clock::now();
    for (const auto& [listen, entries] : by_listener) {
        std::vector<sim::SimInstanceConfig> instances;
        std::string admin;
        for (const auto* e : entries) {
            instances.push_back(e->instance);
            if (!e->admin.empty())
                admin = e->admin;
        }
        auto bus = transport::MemoryBus::create(listen);
        auto host = std::make_unique<sim::SimHost>(bus, instances, epoch);
        const auto [h, p] = transport::parse_host_port(listen);
        bridges.push_back(std::make_unique<sim::TcpBridge>(bus, h, p));
        if (!admin.empty()) {
            const auto [ah, ap] = transport::parse_host_port(admin);
            admins.push_back(std::make_unique<sim::AdminServer>(*host, ah, ap));
        }
        host->start();
        for (const auto& i : instances)
            log::info("sim unit={} listen={} seed={} admin={}", i.settings.unit, listen, i.settings.seed,
                      admin.empty() ? "-" : admin);
        hosts.push_back(std::move(host));
    }
    signals.wait();
    admins.clear();
    bridges.clear();
    for (auto& h : hosts)
        h->stop();
    return kOk;
}

// ---- gateway --------------------------------------------------------------

struct PollArgs {
    std::optional<int> interval_ms;
    std::optional<int> timeout_ms;
    std::optional<int> retries;
    bool bulk = false;
};

void apply_poll(gateway::PollPolicy& p, const PollArgs& a)
{
    if (a.interval_ms)
        p.interval = std::chrono::milliseconds{*a.interval_ms};
    if (a.timeout_ms)
        p.timeout = std::chrono::milliseconds{*a.timeout_ms};
    if (a.retries)
        p.retries = *a.retries;
    if (a.bulk)
        p.bulk = true;
}

int cmd_gateway(const std::string& config_path, const std::string& store_path, const std::vector<std::string>& devs,
                const PollArgs& poll, std::optional<int> duration_s)
{
    auto cfg = load(config_path);
    if (!store_path.empty())
        cfg.store_path = store_path;
    if (!devs.empty()) {
        cfg.devices.clear();
        for (const auto& d : devs)
            cfg.devices.push_back(parse_device_flag(d));
    }
    apply_poll(cfg.poll, poll);
    config::validate(cfg);
    if (cfg.devices.empty())
        throw UsageError("no devices configured");

    SignalWatcher signals;
    store::Store st(cfg.store_path, store::Store::Mode::ReadWrite);
    std::stop_source stop;
    std::stop_callback on_signal(signals.token(), [&] { stop.request_stop(); });
    std::jthread timer;
    if (duration_s)
        timer = std::jthread([&, limit = std::chrono::seconds{*duration_s}](std::stop_token t) {
            std::mutex m;
            std::condition_variable_any cv;
            std::unique_lock lock(m);
            if (!cv.wait_for(lock, t, limit, [] { return false; }))
                stop.request_stop();
        });
    log::info("gateway devices={} store={} interval_ms={}", cfg.devices.size(), cfg.store_path,
              cfg.poll.interval.count());
    const auto result = gateway::run_loop(cfg.devices, cfg.poll, st, stop.get_token());
    log::info("gateway stopped samples={} gaps={}", result.samples, result.gaps);
    if (result.fatal) {
        log::error("gateway fatal: {}", result.diagnostic);
        return kFatal;
    }
    return kOk;
}

// ---- serve ----------------------------------------------------------------

int cmd_serve(const std::string& config_path, const std::string& store_path, const std::string& bind,
              const std::string& user, const std::string& password)
{
    auto cfg = load(config_path);
    if (!store_path.empty())
        cfg.store_path = store_path;
    if (!bind.empty())
        cfg.api_bind = bind;
    cfg.users = users_from(cfg, user, password);
    config::validate(cfg);
    if (cfg.users.empty())
        throw UsageError("no users configured; add users to the config or pass --user/--password");
    const auto [host, port] = transport::parse_host_port(cfg.api_bind);
    if (!std::filesystem::exists(cfg.store_path))
        throw std::runtime_error("store " + cfg.store_path + " does not exist");

    SignalWatcher signals;
    auto st = std::make_shared<store::Store>(cfg.store_path, store::Store::Mode::ReadOnly);
    auto auth = std::make_shared<api::Authenticator>(cfg.users, cfg.token_ttl);
    api::ApiOptions opts;
    for (const auto& d : cfg.devices)
        opts.devices.push_back({d.name, d.unit});
    opts.static_dir = cfg.static_dir;
    api::ApiServer server(st, auth, opts);
    const auto bound = server.bind(host, port);
    server.start();
    log::info("api listening={}:{} store={}", host, bound, cfg.store_path);
    signals.wait();
    server.stop();
    return kOk;
}

// ---- demo -----------------------------------------------------------------

struct DemoArgs {
    std::string store = "demo.store";
    std::optional<double> duration_s;
    std::vector<std::string> faults;
    double corrupt_rate = 0;
    std::string bind = "127.0.0.1:8080";
    bool no_api = false;
    std::string user;
    std::string password;
    std::uint64_t seed = 42;
    int interval_ms = 1000;
    std::string static_dir;
};

int cmd_demo(const std::string& config_path, const DemoArgs& a)
{
    app::DemoOptions opts;
    std::vector<api::AuthRecord> users;
    if (!config_path.empty()) {
        const auto cfg = config::load_config(config_path);
        opts.poll = cfg.poll;
        opts.token_ttl = cfg.token_ttl;
        opts.static_dir = cfg.static_dir;
        users = cfg.users;
    }
    opts.store_path = a.store;
    opts.seed = a.seed;
    opts.poll.interval = std::chrono::milliseconds{a.interval_ms};
    if (opts.poll.timeout > opts.poll.interval)
        opts.poll.timeout = opts.poll.interval / 2;
    for (const auto& f : a.faults)
        opts.faults.push_back(parse_fault_flag(f));
    opts.corrupt_rate = a.corrupt_rate;
    if (!a.static_dir.empty())
        opts.static_dir = a.static_dir;
    if (!a.no_api) {
        opts.api_bind = a.bind;
        transport::parse_host_port(a.bind);
        if (!a.user.empty() || !a.password.empty()) {
            if (a.user.empty() || a.password.empty())
                throw UsageError("--user and --password go together");
            users.push_back(api::make_auth_record(a.user, a.password));
        }
        if (users.empty()) {
            users.push_back(api::make_auth_record("admin", "admin"));
            std::cout << "demo login: admin / admin\n" << std::flush;
        }
        opts.users = users;
    }

    SignalWatcher signals;
    app::Demo demo(opts);
    demo.start();
    if (demo.api_port())
        std::cout << fmt::format("api: http://{}:{}/api\n", transport::parse_host_port(a.bind).first, *demo.api_port())
                  << std::flush;
    const auto limit = a.duration_s ? std::chrono::milliseconds{static_cast<long long>(*a.duration_s * 1000)}
                                    : std::chrono::milliseconds::max();
    const auto result = demo.run_for(limit, signals.token());
    log::info("demo stopped samples={} gaps={} corrupted_chunks={}", result.samples, result.gaps,
              demo.corruption().corrupted.load());
    if (result.fatal) {
        log::error("demo fatal: {}", result.diagnostic);
        return kFatal;
    }
    return kOk;
}

// ---- query / export -------------------------------------------------------

nlohmann::json row_json(const store::StoredRow& row)
{
    if (row.is_sample())
        return api::latest_json(row);
    const auto& g = row.gap();
    return {{"device", g.device}, {"id", row.id}, {"ts", format_iso(g.ts)}, {"gap", describe(g)}};
}

void print_rows(const std::vector<store::StoredRow>& rows, const std::string& format)
{
    if (format == "jsonl") {
        for (const auto& r : rows)
            std::cout << row_json(r).dump() << '\n';
        return;
    }
    std::cout << fmt::format("{:>8}  {:<24}  {:>8}  {:>7}  {:>7}  {:>6}  {:>9}  {:>10}\n", "id", "ts", "V", "A", "Hz",
                             "PF", "W", "kWh");
    for (const auto& r : rows) {
        if (!r.is_sample()) {
            std::cout << fmt::format("{:>8}  {:<24}  gap: {}\n", r.id, format_iso(r.ts()), describe(r.gap()));
            continue;
        }
        const auto& v = r.sample().values;
        std::cout << fmt::format("{:>8}  {:<24}  {:>8.2f}  {:>7.3f}  {:>7.3f}  {:>6.3f}  {:>9.1f}  {:>10.4f}\n", r.id,
                                 format_iso(r.ts()), v.voltage, v.current, v.frequency, v.power_factor,
                                 v.active_power, v.energy);
    }
}

TimePoint time_flag(const std::string& name, const std::string& text)
{
    auto t = parse_time(text);
    if (!t)
        throw UsageError(fmt::format("--{}: cannot read '{}' as a time", name, text));
    return *t;
}

int cmd_query(const std::string& config_path, std::string store_path, const std::string& device, bool latest,
              const std::string& from, const std::string& to, std::size_t limit, const std::string& format,
              bool samples_only)
{
    if (store_path.empty())
        store_path = load(config_path).store_path;
    if (limit == 0)
        throw UsageError("--limit must be positive");
    const auto lo = from.empty() ? TimePoint::min() : time_flag("from", from);
    const auto hi = to.empty() ? TimePoint::max() : time_flag("to", to);
    if (lo > hi)
        throw UsageError("--from is after --to");
    if (!std::filesystem::exists(store_path))
        throw std::runtime_error("store " + store_path + " does not exist");

    store::Store st(store_path, store::Store::Mode::ReadOnly);
    if (st.devices().empty()) {
        std::cout << "no data\n";
        return kOk;
    }
    if (!st.has_device(device))
        throw UsageError(fmt::format("unknown device '{}' (store has: {})", device, fmt::join(st.devices(), ", ")));
    if (latest) {
        auto row = st.query_latest(device);
        if (!row) {
            std::cout << "no data\n";
            return kOk;
        }
        print_rows({*row}, format);
        return kOk;
    }
    const auto result =
        st.query_range(device, lo, hi, limit, samples_only ? store::RowFilter::SamplesOnly : store::RowFilter::All);
    if (result.rows.empty()) {
        std::cout << "no data\n";
        return kOk;
    }
    print_rows(result.rows, format);
    if (result.truncated)
        std::cerr << fmt::format("(truncated at {} rows)\n", limit);
    return kOk;
}

int cmd_export(const std::string& config_path, std::string store_path, const std::string& device)
{
    if (store_path.empty())
        store_path = load(config_path).store_path;
    if (!std::filesystem::exists(store_path))
        throw std::runtime_error("store " + store_path + " does not exist");
    store::Store st(store_path, store::Store::Mode::ReadOnly);
    if (!device.empty() && !st.has_device(device))
        throw UsageError("unknown device '" + device + "'");
    const auto names = device.empty() ? st.devices() : std::vector{device};
    for (const auto& name : names)
        for (const auto& row : st.rows(name))
            std::cout << row_json(row).dump() << '\n';
    return kOk;
}

int cmd_hash_password(const std::string& user, std::string password, int iterations)
{
    if (password.empty()) {
        std::getline(std::cin, password);
        if (password.empty())
            throw UsageError("empty password");
    }
    const auto rec = api::make_auth_record(user, password, iterations);
    std::cout << nlohmann::json{{"username", rec.username},
                                {"password_hash", rec.password_hash},
                                {"salt", rec.salt},
                                {"iterations", rec.iterations}}
                     .dump(2)
              << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"pmon: Modbus RTU power monitor"};
    app.require_subcommand(1);
    std::string config_path;
    std::string level = "info";
    app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--log-level", level, "debug, info, warn, error")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    SimArgs sim_args;
    auto* sim = app.add_subcommand("sim", "Run simulated analysers on a TCP port");
    sim->add_option("--unit", sim_args.unit, "Slave address")->check(CLI::Range(1, 247));
    sim->add_option("--listen", sim_args.listen, "host:port for RTU bytes");
    sim->add_option("--admin", sim_args.admin, "host:port for fault-injection commands");
    sim->add_option("--seed", sim_args.seed, "Random-walk seed");
    sim->add_option("--power-factor", sim_args.power_factor)->check(CLI::Range(0.01, 1.0));
    sim->add_option("--tick-ms", sim_args.tick_ms, "Physics tick; 0 freezes the clock")->check(CLI::Range(0, 3600000));

    std::string store_path;
    std::vector<std::string> devices;
    PollArgs poll;
    std::optional<int> gw_duration;
    auto* gw = app.add_subcommand("gateway", "Poll devices into the store");
    gw->add_option("--store", store_path, "Store file");
    gw->add_option("--device", devices, "NAME:UNIT@ENDPOINT (repeatable, replaces configured devices)");
    gw->add_option("--interval-ms", poll.interval_ms)->check(CLI::Range(10, 3600000));
    gw->add_option("--timeout-ms", poll.timeout_ms)->check(CLI::Range(1, 60000));
    gw->add_option("--retries", poll.retries)->check(CLI::Range(1, 10));
    gw->add_flag("--bulk", poll.bulk, "One 12-register read per cycle");
    gw->add_option("--duration", gw_duration, "Stop after N seconds")->check(CLI::PositiveNumber);

    std::string bind, user, password;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API over a store");
    serve->add_option("--store", store_path, "Store file (opened read-only)");
    serve->add_option("--bind", bind, "host:port");
    serve->add_option("--user", user, "Extra login name");
    serve->add_option("--password", password, "Password for --user");

    DemoArgs demo_args;
    auto* demo = app.add_subcommand("demo", "Simulator, gateway and API in one process");
    demo->add_option("--store", demo_args.store, "Store file")->capture_default_str();
    demo->add_option("--duration", demo_args.duration_s, "Seconds to run (default: until interrupted)")
        ->check(CLI::PositiveNumber);
    demo->add_option("--fault", demo_args.faults, "KIND@SECONDS, e.g. fuse_blown@30 (repeatable)");
    demo->add_option("--corrupt-rate", demo_args.corrupt_rate, "Probability of a bit flip per response chunk")
        ->check(CLI::Range(0.0, 1.0));
    demo->add_option("--bind", demo_args.bind, "API host:port")->capture_default_str();
    demo->add_flag("--no-api", demo_args.no_api, "Do not start the API");
    demo->add_option("--user", demo_args.user, "Login name");
    demo->add_option("--password", demo_args.password, "Password for --user");
    demo->add_option("--seed", demo_args.seed)->capture_default_str();
    demo->add_option("--interval-ms", demo_args.interval_ms)->check(CLI::Range(50, 3600000))->capture_default_str();
    demo->add_option("--static-dir", demo_args.static_dir, "Dashboard assets to serve at /");

    std::string device = "pm01", from, to, format = "table";
    std::size_t limit = 1000;
    bool latest = false, samples_only = false;
    auto* query = app.add_subcommand("query", "Print rows from a store");
    query->add_option("--store", store_path, "Store file");
    query->add_option("--device", device)->capture_default_str();
    auto* latest_flag = query->add_flag("--latest", latest, "Newest sample only");
    query->add_option("--from", from, "ISO-8601 UTC or Unix ms")->excludes(latest_flag);
    query->add_option("--to", to, "ISO-8601 UTC or Unix ms")->excludes(latest_flag);
    query->add_option("--limit", limit)->capture_default_str();
    query->add_flag("--samples-only", samples_only, "Leave out gap events");
    query->add_option("--format", format)->check(CLI::IsMember({"table", "jsonl"}))->capture_default_str();

    std::string export_device;
    auto* exp = app.add_subcommand("export", "Dump every row as JSON lines");
    exp->add_option("--store", store_path, "Store file");
    exp->add_option("--device", export_device, "Only this device");

    std::string hp_user;
    std::string hp_password;
    int hp_iterations = 60000;
    auto* hp = app.add_subcommand("hash-password", "Make a users[] entry (password read from stdin)");
    hp->add_option("--user", hp_user)->required();
    hp->add_option("--password", hp_password, "Read from stdin when omitted");
    hp->add_option("--iterations", hp_iterations)->check(CLI::Range(1000, 10000000))->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    log::set_level(level == "debug"  ? log::Level::Debug
                   : level == "warn"  ? log::Level::Warn
                   : level == "error" ? log::Level::Error
                                      : log::Level::Info);
    try {
        if (*sim)
            return cmd_sim(config_path, sim_args);
        if (*gw)
            return cmd_gateway(config_path, store_path, devices, poll, gw_duration);
        if (*serve)
            return cmd_serve(config_path, store_path, bind, user, password);
        if (*demo)
            return cmd_demo(config_path, demo_args);
        if (*query)
            return cmd_query(config_path, store_path, device, latest, from, to, limit, format, samples_only);
        if (*exp)
            return cmd_export(config_path, store_path, export_device);
        if (*hp)
            return cmd_hash_password(hp_user, hp_password, hp_iterations);
    } catch (const UsageError& e) {
        std::cerr << "pmon: " << e.what() << '\n';
        return kUsage;
    } catch (const config::ConfigError& e) {
        std::cerr << "pmon: config " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "pmon: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "pmon: " << e.what() << '\n';
        return kFatal;
    }
    return kUsage;
}
