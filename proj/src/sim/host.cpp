#include "pmon/sim/host.hpp"

#include <fmt/format.h>
#include "json.hpp"

#include <charconv>
#include <set>
#include <sstream>

namespace pmon::sim {

using transport::milliseconds;

SimHost::SimHost(std::shared_ptr<transport::MemoryBus> bus, const std::vector<SimInstanceConfig>& instances,
                 transport::Clock::time_point epoch)
    : bus_(std::move(bus))
{
    std::set<std::uint8_t> units;
    for (const auto& inst : instances) {
        if (inst.settings.unit < 1 || inst.settings.unit > 247)
            throw std::invalid_argument(fmt::format("unit {} outside 1..247", inst.settings.unit));
        if (!units.insert(inst.settings.unit).second)
            throw std::invalid_argument(
                fmt::format("unit {} configured twice on {}", inst.settings.unit, bus_->name()));
        sims_.push_back(std::make_unique<Simulator>(inst.settings, inst.tick_period, epoch));
    }
}

SimHost::~SimHost()
{
    stop();
}

void SimHost::start()
{
    if (!threads_.empty())
        return;
    for (auto& sim : sims_) {
        ports_.push_back(bus_->attach());
        threads_.emplace_back([sim = sim.get(), port = ports_.back().get()](std::stop_token st) {
            sim->serve(*port, st);
        });
    }
}

void SimHost::stop()
{
    for (auto& t : threads_)
        t.request_stop();
    threads_.clear();
    ports_.clear();
}

Simulator* SimHost::find(std::uint8_t unit)
{
    for (auto& sim : sims_)
        if (sim->unit() == unit)
            return sim.get();
    return nullptr;
}

void SimHost::post_all(Control control)
{
    for (auto& sim : sims_)
        sim->post(control);
}

TcpBridge::TcpBridge(std::shared_ptr<transport::MemoryBus> bus, const std::string& host, std::uint16_t port)
    : bus_(std::move(bus)), listener_(host, port)
{
    thread_ = std::jthread([this](std::stop_token st) { run(st); });
}

TcpBridge::~TcpBridge()
{
    thread_.request_stop();
}

void TcpBridge::run(std::stop_token stop)
{
    std::unique_ptr<transport::Channel> client;
    std::unique_ptr<transport::Channel> port;
    while (!stop.stop_requested()) {
        if (auto next = listener_.accept(milliseconds{client ? 0 : 50})) {
            client = std::move(next);
            port = bus_->attach();
        }
        if (!client)
            continue;
        try {
            if (auto bytes = client->read_some(milliseconds{5}); !bytes.empty())
                port->write(bytes);
            if (auto bytes = port->read_some(milliseconds{5}); !bytes.empty())
                client->write(bytes);
        } catch (const transport::ChannelClosed&) {
            client.reset();
            port.reset();
        }
    }
}

namespace {

nlohmann::json status_of(const Simulator& sim)
{
    const auto state = sim.snapshot();
    const auto r = state.readings();
    return {
        {"unit", state.settings.unit},
        {"fuse_intact", state.fuse_intact},
        {"sagging", state.sagging},
        {"pump_on", state.pump_on},
        {"ticks", state.ticks},
        {"voltage", r.voltage},
        {"current", r.current},
        {"frequency", r.frequency},
        {"power_factor", r.power_factor},
        {"active_power", r.active_power},
        {"energy", r.energy},
    };
}

} // namespace

std::string handle_admin_command(SimHost& host, std::string_view line)
{
    std::istringstream in{std::string(line)};
    std::string verb, arg1, arg2;
    in >> verb >> arg1 >> arg2;

    auto parse_unit = [](const std::string& text) -> std::optional<std::uint8_t> {
        unsigned v = 0;
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || p != text.data() + text.size() || v < 1 || v > 247)
            return std::nullopt;
        return static_cast<std::uint8_t>(v);
    };

    if (verb == "fault") {
        const auto fault = fault_from_name(arg1);
        if (!fault)
            return "error unknown fault '" + arg1 + "'";
        if (arg2.empty()) {
            host.post_all(*fault);
            return "ok";
        }
        const auto unit = parse_unit(arg2);
        Simulator* sim = unit ? host.find(*unit) : nullptr;
        if (!sim)
            return "error no unit " + arg2;
        sim->post(*fault);
        return "ok";
    }
    if (verb == "status") {
        nlohmann::json out = nlohmann::json::array();
        if (arg1.empty()) {
            for (const auto& sim : host.simulators())
                out.push_back(status_of(*sim));
        } else {
            const auto unit = parse_unit(arg1);
            Simulator* sim = unit ? host.find(*unit) : nullptr;
            if (!sim)
                return "error no unit " + arg1;
            out.push_back(status_of(*sim));
        }
        return "ok " + out.dump();
    }
    return "error unknown command '" + verb + "'";
}

AdminServer::AdminServer(SimHost& host, const std::string& bind_host, std::uint16_t port)
    : host_(host), listener_(bind_host, port)
{
    thread_ = std::jthread([this](std::stop_token st) { run(st); });
}

AdminServer::~AdminServer()
{
    thread_.request_stop();
}

void AdminServer::run(std::stop_token stop)
{
    while (!stop.stop_requested()) {
        auto client = listener_.accept(milliseconds{50});
        if (!client)
            continue;
        std::string pending;
        try {
            while (!stop.stop_requested()) {
                auto bytes = client->read_some(milliseconds{50});
                pending.append(bytes.begin(), bytes.end());
                std::size_t nl;
                while ((nl = pending.find('\n')) != std::string::npos) {
                    auto line = pending.substr(0, nl);
                    pending.erase(0, nl + 1);
                    if (!line.empty() && line.back() == '\r')
                        line.pop_back();
                    const auto reply = handle_admin_command(host_, line) + "\n";
                    client->write(std::span(reinterpret_cast<const std::uint8_t*>(reply.data()), reply.size()));
                }
            }
        } catch (const transport::ChannelClosed&) {
        }
    }
}

} // namespace pmon::sim
