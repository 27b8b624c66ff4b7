#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(HVDC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("hvdc_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("parallel sizing writes the same files as serial sizing") {
    const auto cfg = hvdc::test::config_path("case1.json");
    const auto a = scratch("serial"), b = scratch("parallel"), c = scratch("again");
    REQUIRE(run("size --config " + cfg + " --scenarios S7,S10 --jobs 1 --export csv,json,traces --out " + a.string()) == 0);
    REQUIRE(run("size --config " + cfg + " --scenarios S7,S10 --jobs 2 --out " + b.string()) == 0);
    REQUIRE(run("size --config " + cfg + " --scenarios S7,S10 --jobs 2 --out " + c.string()) == 0);
    for (const char* f : {"report.json", "summary.csv"}) {
        CAPTURE(f);
        const auto ref = slurp(a / f);
        CHECK_FALSE(ref.empty());
        CHECK(ref == slurp(b / f));
        CHECK(ref == slurp(c / f));
    }
    CHECK(fs::exists(a / "traces" / "CB12_S7.csv"));
}

TEST_CASE("replaying against a report from another configuration is refused") {
    const auto cfg = hvdc::test::config_path("case1.json");
    const auto dir = scratch("mismatch");
    REQUIRE(run("size --config " + cfg + " --scenarios S7 --export json --out " + dir.string()) == 0);
    const auto report = dir / "report.json";
    CHECK(run("replay --config " + cfg + " --report " + report.string() +
              " --scenario S7 --breaker CB12 --zone Z1 --out " + dir.string()) == 0);

    auto doc = nlohmann::json::parse(slurp(report));
    doc["config_hash"] = "0000000000000000";
    std::ofstream(dir / "tampered.json") << doc.dump();
    CHECK(run("replay --config " + cfg + " --report " + (dir / "tampered.json").string() +
              " --scenario S7 --breaker CB12 --zone Z1 --out " + dir.string()) == 4);
}

TEST_CASE("usage and configuration errors have their own exit codes") {
    const auto cfg = hvdc::test::config_path("case1.json");
    const auto dir = scratch("errors");
    CHECK(run("") == 1);
    CHECK(run("envelope --config " + cfg + " --breaker CB12 --zone Z1 --tn ''") == 1);
    std::ofstream(dir / "broken.json") << "{\"buses\": 3}";
    CHECK(run("size --config " + (dir / "broken.json").string() + " --out " + dir.string()) == 2);
    CHECK(run("size --config " + cfg + " --scenarios NOPE --out " + dir.string()) != 0);
}

TEST_CASE("an empty scenario selection yields an empty report") {
    const auto cfg = hvdc::test::config_path("case1.json");
    const auto dir = scratch("empty");
    REQUIRE(run("size --config " + cfg + " --scenarios '' --out " + dir.string()) == 0);
    const auto doc = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(doc["scenarios"].empty());
}
