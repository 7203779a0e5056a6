// Gateway daemon: device listener, HTTP API and alert dispatch.

#include "safewatch/gateway/config.hpp"
#include "safewatch/gateway/service.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <iostream>

int main(int argc, char** argv) {
    using namespace safewatch::gateway;

    CLI::App app{"SafeWatch gateway"};
    std::string config_path;
    std::string data_dir;
    int device_port = -1;
    int api_port = -1;
    double clock_speed = 0.0;
    bool print_config = false;
    bool verbose = false;
    app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--data-dir", data_dir, "override data_dir");
    app.add_option("--device-port", device_port, "override device_port (0 picks one)");
    app.add_option("--api-port", api_port, "override api_port (0 picks one)");
    app.add_option("--clock-speed", clock_speed, "override clock_speed");
    app.add_flag("--print-config", print_config, "print the effective config and exit");
    app.add_flag("-v,--verbose", verbose, "debug logging");
    CLI11_PARSE(app, argc, argv);

    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
    try {
        GatewayConfig config = config_path.empty() ? GatewayConfig{} : load_config(config_path);
        if (!data_dir.empty()) config.data_dir = data_dir;
        if (device_port >= 0) config.device_port = device_port;
        if (api_port >= 0) config.api_port = api_port;
        if (clock_speed > 0.0) config.clock_speed = clock_speed;
        if (print_config) {
            std::cout << to_json(config).dump(2) << '\n';
            return 0;
        }

        // Block the stop signals before any thread starts so only sigwait sees them.
        sigset_t stop_signals;
        sigemptyset(&stop_signals);
        sigaddset(&stop_signals, SIGINT);
        sigaddset(&stop_signals, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

        GatewayService service(config, deps_from_config(config));
        service.start();
        const auto& replay = service.replay_report();
        spdlog::info("devices on {}:{}, api on {}:{}, replayed {} records ({} mismatches)", config.device_host,
                     service.device_port(), config.api_host, service.api_port(), replay.records,
                     replay.mismatches);
        std::cout << "device_port=" << service.device_port() << '\n'
                  << "api_port=" << service.api_port() << '\n'
                  << std::flush;

        int sig = 0;
        sigwait(&stop_signals, &sig);
        spdlog::info("signal {}, shutting down", sig);
        service.stop();
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
