#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "wamgc/harness.hpp"

using namespace wamgc;
using namespace wamgc::harness;

namespace {

RunConfig config(PolicyKind kind, std::uint64_t block_size = 1024) {
    RunConfig c;
    c.machine.heap.block_size = block_size;
    c.machine.heap.address_limit = 1024 * block_size;
    c.machine.policy.kind = kind;
    c.machine.write_barrier = kind != PolicyKind::Semispace;
    c.timing = false;
    c.verify = true;
    return c;
}

std::size_t count(const std::string &s, char c) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), c)); }

} // namespace

TEST_CASE("trace parsing reports the offending line") {
    auto line_of = [](const std::string &text) {
        try {
            parse_trace(text);
        } catch (const ParseError &e) {
            return e.line();
        }
        return std::size_t{0};
    };
    CHECK(line_of("var x\n\nfrob y\n") == 3);
    CHECK(line_of("int x 1z\n") == 1);
    CHECK(line_of("# comment\nlist l a\n") == 2);
    CHECK(line_of("setreg 16 x\n") == 1);
    CHECK(line_of("gc now\n") == 1);
    CHECK(line_of("var x # trailing comment\ncheckpoint\n") == 0);
}

TEST_CASE("formatting and parsing round-trip") {
    std::string text = "var x\nint i -3\nstruct s f x i\nstruct g0 g\nlist l i x\nbind x i\nunify s s\nsetreg 2 l\n"
                       "cp c1\nbt c1\ncut c1\ngc\ncheckpoint\n";
    auto commands = parse_trace(text);
    CHECK(commands.size() == 13);
    CHECK(format_trace(commands) == text);
    for (const std::string &name : workload_names()) {
        auto w = builtin_workload(name, 50, 3);
        CHECK(format_trace(parse_trace(format_trace(w))) == format_trace(w));
    }
    CHECK_THROWS_AS(builtin_workload("nope", 10, 1), std::invalid_argument);
}

TEST_CASE("runs are deterministic for a fixed seed") {
    for (PolicyKind kind : {PolicyKind::Incremental, PolicyKind::Generational, PolicyKind::Semispace}) {
        auto w = builtin_workload("mixed", 300, 17);
        RunStats a = run(config(kind, 256), w);
        RunStats b = run(config(kind, 256), w);
        CHECK(to_json(a) == to_json(b));
        CHECK(a.n_gc > 0);
    }
    CHECK(format_trace(builtin_workload("mixed", 300, 17)) != format_trace(builtin_workload("mixed", 300, 18)));
}

TEST_CASE("an empty workload runs cleanly") {
    RunStats s = run(config(PolicyKind::Incremental), {});
    CHECK(s.commands == 0);
    CHECK(s.n_gc == 0);
    CHECK(s.w_a == 0.0);
}

TEST_CASE("csv header and rows line up") {
    RunStats s = run(config(PolicyKind::Generational, 256), builtin_workload("list_builder", 200, 1));
    std::string header = csv_header();
    std::string row = to_csv_row(s);
    CHECK(count(header, ',') == count(row, ','));
    CHECK(header.rfind("workload,", 0) == 0);
    CHECK(nlohmann::json::parse(to_json(s))["policy"] == "gen");
}

TEST_CASE("commands on undefined names are faults") {
    CHECK_THROWS_AS(run(config(PolicyKind::Incremental), parse_trace("setreg 0 x\n")), Fault);
    CHECK_THROWS_AS(run(config(PolicyKind::Incremental), parse_trace("bt nowhere\n")), Fault);
    CHECK_THROWS_AS(run(config(PolicyKind::Incremental), parse_trace("int a 1\nint b 2\nbind a b\n")), Fault);
}

TEST_CASE("verification counts its checks") {
    std::string text = "var x\ncp c\nint i 1\nbind x i\ngc\ncheckpoint\nbt c\n";
    RunStats s = run(config(PolicyKind::Incremental, 256), parse_trace(text));
    CHECK(s.checkpoints == 1);
    CHECK(s.completeness_checks == 1);
    CHECK(s.backtrack_checks == 1);
    CHECK(s.remset_safety_checks >= 1);
    CHECK(s.backtracks == 1);
}

TEST_CASE("the gc log holds one line per collection") {
    std::ostringstream log;
    RunConfig c = config(PolicyKind::Incremental, 256);
    c.gc_log = &log;
    RunStats s = run(c, builtin_workload("tree_rewriter", 300, 2));
    CHECK(count(log.str(), '\n') == s.n_gc);
}
