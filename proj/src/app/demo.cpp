#include "pmon/app/demo.hpp"

#include "pmon/log.hpp"

#include <condition_variable>
#include <thread>

namespace pmon::app {

using transport::Clock;
using transport::milliseconds;

Demo::Demo(DemoOptions options)
    : options_(std::move(options)), bus_(transport::MemoryBus::create("demo")),
      flip_stats_(std::make_shared<transport::BitFlipProxy::Stats>())
{
}

Demo::~Demo()
{
    stop();
}

void Demo::start()
{
    if (started_)
        return;
    started_ = true;

    // Lead time so every component is up before the first tick.
    epoch_ = Clock::now() + milliseconds{100};
    epoch_utc_ = now_utc() + std::chrono::duration_cast<milliseconds>(epoch_ - Clock::now());

    sim::SimInstanceConfig inst;
    inst.settings.unit = options_.unit;
    inst.settings.seed = options_.seed;
    inst.settings.power_factor = options_.power_factor;
    inst.tick_period = options_.poll.interval;
    sims_ = std::make_unique<sim::SimHost>(bus_, std::vector{inst}, epoch_);
    if (options_.tap)
        sims_->simulators().front()->set_response_tap(options_.tap);
    sims_->start();

    writer_ = std::make_shared<store::Store>(options_.store_path, store::Store::Mode::ReadWrite);

    if (!options_.api_bind.empty()) {
        auto reader = std::make_shared<store::Store>(options_.store_path, store::Store::Mode::ReadOnly);
        auto auth = std::make_shared<api::Authenticator>(options_.users, options_.token_ttl);
        api::ApiOptions api_opts;
        api_opts.devices.push_back({options_.device, options_.unit});
        api_opts.static_dir = options_.static_dir;
        api_ = std::make_unique<api::ApiServer>(reader, auth, api_opts);
        const auto [host, port] = transport::parse_host_port(options_.api_bind);
        api_port_ = api_->bind(host, port);
        api_->start();
    }

    gateway::DeviceConfig device;
    device.name = options_.device;
    device.unit = options_.unit;
    device.transport = transport::parse_endpoint("mem://" + bus_->name());

    gateway::LoopOptions loop;
    loop.factory.add_bus(bus_);
    if (options_.corrupt_rate > 0) {
        loop.factory.set_wrapper([rate = options_.corrupt_rate, seed = options_.corrupt_seed,
                                  stats = flip_stats_](std::unique_ptr<transport::Channel> ch) {
            return std::make_unique<transport::BitFlipProxy>(std::move(ch), rate, seed, stats);
        });
    }
    loop.first_deadline = epoch_ + options_.poll.interval / 2;

    result_ = result_promise_.get_future();
    gateway_ = std::jthread([this, device, loop = std::move(loop)](std::stop_token st) mutable {
        try {
            result_promise_.set_value(gateway::run_loop({device}, options_.poll, *writer_, st, std::move(loop)));
        } catch (...) {
            result_promise_.set_exception(std::current_exception());
        }
    });

    if (!options_.faults.empty()) {
        scheduler_ = std::jthread([this](std::stop_token st) {
            std::mutex m;
            std::condition_variable_any cv;
            for (const auto& f : options_.faults) {
                std::unique_lock lock(m);
                if (cv.wait_until(lock, st, epoch_ + f.at, [] { return false; }); st.stop_requested())
                    return;
                log::info("injecting fault {} at +{} ms", sim::name_of(f.fault), f.at.count());
                sims_->post_all(f.fault);
            }
        });
    }
}

gateway::LoopResult Demo::stop()
{
    if (final_)
        return *final_;
    if (!started_)
        return {};
    scheduler_ = {};
    gateway_.request_stop();
    gateway_ = {};
    final_ = result_.get();
    if (api_)
        api_->stop();
    sims_->stop();
    bus_->close();
    return *final_;
}

gateway::LoopResult Demo::run_for(milliseconds duration, std::stop_token stop_token)
{
    start();
    std::mutex m;
    std::condition_variable_any cv;
    std::unique_lock lock(m);
    cv.wait_until(lock, stop_token, epoch_ + duration, [] { return false; });
    return stop();
}

} // namespace pmon::app
