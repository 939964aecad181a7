#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wamgc/harness.hpp"

using namespace wamgc;

int main(int argc, char **argv) {
    CLI::App app{"Block-based incremental copying collector simulator for a WAM-style heap"};

    std::string policy = "inc";
    std::uint64_t block_size = 4096;
    std::uint64_t address_limit = std::uint64_t{1} << 26;
    std::string workload;
    std::string trace;
    std::size_t scale = 1000;
    std::uint64_t seed = 1;
    std::string report = "json";
    bool verify = false;
    bool no_timing = false;
    bool no_early_reset = false;
    std::string gc_log;
    std::string dump_trace;

    app.add_option("--policy", policy, "Collection policy")->check(CLI::IsMember({"semispace", "inc", "gen"}));
    app.add_option("--block-size", block_size, "Heap block size in cells (power of two)");
    app.add_option("--address-limit", address_limit, "Size of the simulated address space in cells");
    auto *wl = app.add_option("--workload", workload, "Built-in workload")->check(CLI::IsMember(harness::workload_names()));
    auto *tr = app.add_option("--trace", trace, "Trace file to replay")->check(CLI::ExistingFile);
    wl->excludes(tr);
    app.add_option("--scale", scale, "Workload size in steps");
    app.add_option("--seed", seed, "Workload seed");
    app.add_option("--report", report, "Report format")->check(CLI::IsMember({"json", "csv"}));
    app.add_flag("--verify", verify, "Check the term graph and remembered sets around every collection and backtrack");
    app.add_flag("--no-timing", no_timing, "Report all durations as zero");
    app.add_flag("--no-early-reset", no_early_reset, "Disable partial early reset");
    app.add_option("--gc-log", gc_log, "Write one JSON line per collection to this file");
    app.add_option("--dump-trace", dump_trace, "Write the command stream being run to this file");

    CLI11_PARSE(app, argc, argv);

    if (workload.empty() && trace.empty()) {
        std::cerr << "one of --workload or --trace is required\n";
        return 1;
    }

    harness::RunConfig config;
    config.machine.heap.block_size = block_size;
    config.machine.heap.address_limit = address_limit;
    config.machine.policy.kind = *parse_policy(policy);
    config.machine.write_barrier = config.machine.policy.kind != PolicyKind::Semispace;
    config.machine.early_reset = !no_early_reset;
    config.verify = verify;
    config.timing = !no_timing;

    std::ofstream log;
    if (!gc_log.empty()) {
        log.open(gc_log);
        if (!log) {
            std::cerr << "cannot open " << gc_log << "\n";
            return 1;
        }
        config.gc_log = &log;
    }

    try {
        std::vector<harness::Command> commands;
        if (!trace.empty()) {
            std::ifstream in(trace);
            commands = harness::parse_trace(in);
            config.workload = trace;
        } else {
            commands = harness::builtin_workload(workload, scale, seed);
            config.workload = workload;
        }
        if (!dump_trace.empty()) {
            std::ofstream out(dump_trace);
            out << harness::format_trace(commands);
        }
        harness::RunStats stats = harness::run(config, commands);
        if (report == "csv") {
            std::cout << harness::csv_header() << "\n" << harness::to_csv_row(stats) << "\n";
        } else {
            std::cout << harness::to_json(stats) << "\n";
        }
    } catch (const harness::ParseError &e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const harness::VerifyFailure &e) {
        std::cerr << "verification failed (" << harness::check_name(e.check()) << "): " << e.what() << "\n";
        return 2;
    } catch (const Fault &e) {
        std::cerr << "fault: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
