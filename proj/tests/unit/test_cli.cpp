#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// End-to-end checks of the peaklab binary: exit-code contract, verdict
// structure, and byte-identical reruns.  The binary path arrives in the
// PEAKLAB_CLI environment variable.

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
    const char* p = std::getenv("PEAKLAB_CLI");
    REQUIRE_MESSAGE(p != nullptr, "PEAKLAB_CLI must point at the binary");
    return p;
}

int run_cmd(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    if (rc == -1) return -1;
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

fs::path fresh_dir(const std::string& stem) {
    const fs::path d =
        fs::temp_directory_path() / ("peaklab_" + stem + "_" + std::to_string(getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), ("missing file " + p.string()).c_str());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("help and argument errors use the documented exit codes") {
    const std::string cli = cli_path();
    CHECK(run_cmd(cli + " --help") == 0);
    CHECK(run_cmd(cli + " stationary --help") == 0);
    // missing subcommand / unknown flag / missing required --config
    CHECK(run_cmd(cli) == 2);
    CHECK(run_cmd(cli + " no-such-subcommand") == 2);
    CHECK(run_cmd(cli + " stationary") == 2);
}

TEST_CASE("config validation failures exit with code 2") {
    const std::string cli = cli_path();
    const fs::path d = fresh_dir("badcfg");

    write_text(d / "unknown.json", R"({"M": 1.0, "bogus_key": 3})");
    CHECK(run_cmd(cli + " stationary --config " + (d / "unknown.json").string() + " --out " +
                  (d / "o1").string()) == 2);

    write_text(d / "badkernel.json", R"({"alpha": 1.5})");
    CHECK(run_cmd(cli + " stationary --config " + (d / "badkernel.json").string() + " --out " +
                  (d / "o2").string()) == 2);

    write_text(d / "both.json", R"({"M": 1.0, "A": 2.0})");
    CHECK(run_cmd(cli + " stationary --config " + (d / "both.json").string() + " --out " +
                  (d / "o3").string()) == 2);

    write_text(d / "notjson.json", "not json at all {");
    CHECK(run_cmd(cli + " stationary --config " + (d / "notjson.json").string() + " --out " +
                  (d / "o4").string()) == 2);

    fs::remove_all(d);
}

TEST_CASE("stationary run produces a passing verdict with the documented shape") {
    const std::string cli = cli_path();
    const fs::path d = fresh_dir("statrun");
    write_text(d / "cfg.json", R"({"M": 1.0})");
    const fs::path out = d / "out";
    CHECK(run_cmd(cli + " stationary --config " + (d / "cfg.json").string() + " --out " +
                  out.string() + " --seed 7") == 0);

    CHECK(fs::exists(out / "profile.csv"));
    CHECK(fs::exists(out / "run.json"));

    const json v = json::parse(slurp(out / "verdict.json"));
    CHECK(v.at("pass").get<bool>());
    CHECK(v.at("seed").get<uint64_t>() == 7);
    REQUIRE(v.at("checks").is_array());
    REQUIRE(!v.at("checks").empty());
    for (const auto& chk : v.at("checks")) {
        CHECK(chk.contains("name"));
        CHECK(chk.contains("tolerance"));
        CHECK(chk.contains("measured"));
        CHECK(chk.at("pass").get<bool>());
    }
    fs::remove_all(d);
}

TEST_CASE("fixed-seed reruns are byte-identical outside the sidecar") {
    const std::string cli = cli_path();
    const fs::path d = fresh_dir("determinism");
    write_text(d / "cfg.json", R"({"M": 1.0, "rho_list": [0.0, 0.5]})");
    const std::string base = cli + " stationary --config " + (d / "cfg.json").string();
    CHECK(run_cmd(base + " --out " + (d / "a").string() + " --seed 9 --jobs 2") == 0);
    CHECK(run_cmd(base + " --out " + (d / "b").string() + " --seed 9 --jobs 2") == 0);

    size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(d / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), d / "a");
        if (rel.filename() == "run.json") continue; // carries the timestamp
        CHECK_MESSAGE(slurp(e.path()) == slurp(d / "b" / rel), rel.string().c_str());
        ++compared;
    }
    CHECK(compared >= 4);
    fs::remove_all(d);
}

TEST_CASE("measure-evolve run conserves mass and reports its diagnostics") {
    const std::string cli = cli_path();
    const fs::path d = fresh_dir("measrun");
    write_text(d / "cfg.json", R"({"M": 1.0, "T": 0.5, "R": 40.0})");
    const fs::path out = d / "out";
    CHECK(run_cmd(cli + " measure-evolve --config " + (d / "cfg.json").string() + " --out " +
                  out.string()) == 0);

    const json v = json::parse(slurp(out / "verdict.json"));
    CHECK(v.at("pass").get<bool>());

    const json diag = json::parse(slurp(out / "diagnostics.json"));
    REQUIRE(diag.at("times").is_array());
    const size_t nt = diag.at("times").size();
    CHECK(nt >= 2);
    CHECK(diag.at("mass").size() == nt);
    CHECK(diag.at("norms").size() == nt);
    CHECK(diag.at("sup_moment_1").get<double>() > 0.0);
    // one state file per recorded time
    size_t nfiles = 0;
    for (const auto& e : fs::directory_iterator(out / "states"))
        if (e.is_regular_file()) ++nfiles;
    CHECK(nfiles == nt);
    fs::remove_all(d);
}
