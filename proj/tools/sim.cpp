// Watch emulator: trace generation, streaming to a gateway, offline evaluation.

#include "safewatch/sim/scenario.hpp"
#include "safewatch/sim/simulator.hpp"
#include "safewatch/sim/trace.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>

namespace {

std::pair<std::string, int> split_address(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0) {
        throw std::invalid_argument(fmt::format("gateway address must be host:port, got '{}'", address));
    }
    const int port = std::stoi(address.substr(colon + 1));
    if (port <= 0 || port > 65535) throw std::invalid_argument(fmt::format("bad port in '{}'", address));
    return {address.substr(0, colon), port};
}

}  // namespace

int main(int argc, char** argv) {
    using namespace safewatch::sim;

    CLI::App app{"SafeWatch device simulator"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "write a scenario trace");
    std::string scenario;
    std::uint64_t seed = 1;
    std::string out_path;
    gen->add_option("--scenario", scenario, "scenario name")->required();
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("-o,--output", out_path, "trace file")->required();

    auto* run_cmd = app.add_subcommand("run", "stream a trace to a gateway");
    std::string trace_path;
    std::string gateway = "127.0.0.1:7470";
    RunOptions options;
    std::string reply;
    run_cmd->add_option("trace", trace_path, "trace file")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--gateway", gateway, "host:port of the device listener");
    run_cmd->add_option("--speed", options.speed, "trace time multiplier, 0 for unpaced")->capture_default_str();
    run_cmd->add_option("--reply", reply, "override the reply script")->check(CLI::IsMember({"none", "ok"}));
    run_cmd->add_option("--device", options.device_id, "device id announced to the gateway")->capture_default_str();
    run_cmd->add_option("--reply-delay-ms", options.reply_delay_ms, "trace ms before answering a prompt")
        ->capture_default_str();
    run_cmd->add_option("--linger-ms", options.linger_ms, "keep listening after the last row")->capture_default_str();

    auto* eval_cmd = app.add_subcommand("eval", "offline fall-detection metrics over a corpus");
    std::string corpus_dir;
    double threshold = 1.4;
    eval_cmd->add_option("--corpus", corpus_dir, "directory of .trace files")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--threshold", threshold, "RMS threshold in g")->capture_default_str();

    auto* corpus_cmd = app.add_subcommand("corpus", "write the labelled fall/adl corpus");
    std::string corpus_out;
    int count = 100;
    corpus_cmd->add_option("-o,--output", corpus_out, "output directory")->required();
    corpus_cmd->add_option("--count", count, "traces per label (seeds 1..count)")->capture_default_str();

    app.add_subcommand("list", "list scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto parent = std::filesystem::path(out_path).parent_path();
            if (!parent.empty()) std::filesystem::create_directories(parent);
            save_trace(out_path, generate(scenario, seed));
        } else if (*run_cmd) {
            const auto [host, port] = split_address(gateway);
            if (!reply.empty()) options.reply = reply_from(reply);
            const auto report = run(load_trace(trace_path), host, port, options);
            print_report(std::cout, report);
            return report.ok() ? 0 : 1;
        } else if (*eval_cmd) {
            print_metrics(std::cout, evaluate(load_corpus(corpus_dir), threshold));
        } else if (*corpus_cmd) {
            std::filesystem::create_directories(corpus_out);
            for (int s = 1; s <= count; ++s) {
                const auto u = static_cast<std::uint64_t>(s);
                const char* fall = s % 2 ? "fall-forward" : "fall-side";
                const char* adl = s % 2 ? "adl-walk" : "adl-sit";
                save_trace(fmt::format("{}/fall-{:03}.trace", corpus_out, s), generate(fall, u));
                save_trace(fmt::format("{}/adl-{:03}.trace", corpus_out, s), generate(adl, u));
            }
            std::cout << "traces=" << 2 * count << '\n';
        } else {
            for (const auto& s : scenarios()) {
                std::cout << fmt::format("{:<16} label={} reply={} duration_ms={}  {}\n", s.name, s.label, s.reply,
                                         s.duration_ms, s.summary);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
