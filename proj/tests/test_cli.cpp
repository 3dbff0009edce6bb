#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {
struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(QMDPNET_CLI_BIN) + " " + args + " 2>/dev/null";
    std::array<char, 4096> buf{};
    RunResult res;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) res.out.append(buf.data(), n);
    res.exit_code = WEXITSTATUS(pclose(pipe));
    return res;
}

std::string temp_dir(const char* tag) {
    std::string dir = (fs::temp_directory_path() / (std::string("qmdpnet_cli_") + tag)).string();
    fs::remove_all(dir);
    return dir;
}
}  // namespace

TEST_CASE("gen produces a dataset directory and a machine-readable summary") {
    const std::string out = temp_dir("gen");
    RunResult r = run_cli("gen --domain grid --n 8 --variant det --envs 20 --trajs 2 --seed 7 --out " + out);
    REQUIRE(r.exit_code == 0);
    json j = json::parse(r.out);
    CHECK(j["env_count"] == 20);
    CHECK(j["traj_count"].get<int>() > 0);
    CHECK(fs::exists(out + "/manifest.json"));

    // identical configuration reproduces the dataset checksum
    const std::string out2 = temp_dir("gen2");
    RunResult r2 = run_cli("gen --domain grid --n 8 --variant det --envs 20 --trajs 2 --seed 7 --out " + out2);
    json j2 = json::parse(r2.out);
    CHECK(j["dataset_checksum"] == j2["dataset_checksum"]);
    fs::remove_all(out);
    fs::remove_all(out2);
}

TEST_CASE("solve emits a deterministic JSON report") {
    RunResult a = run_cli("solve --domain grid --n 8 --variant det --trials 25 --seed 3");
    REQUIRE(a.exit_code == 0);
    json j = json::parse(a.out);
    CHECK(j["trials"] == 25);
    CHECK(j["success_rate_pct"].get<double>() > 90.0);
    RunResult b = run_cli("solve --domain grid --n 8 --variant det --trials 25 --seed 3");
    CHECK(a.out == b.out);  // byte-for-byte
}

TEST_CASE("solve evaluates a .pomdp file directly") {
    RunResult r = run_cli(std::string("solve --pomdp ") + QMDPNET_DATA_DIR +
                          "/hallway2.pomdp --trials 40 --cap 251 --seed 3");
    REQUIRE(r.exit_code == 0);
    json j = json::parse(r.out);
    CHECK(j["domain_id"] == "pomdp-qmdp");
    CHECK(j["trials"] == 40);
}

TEST_CASE("gradcheck passes and reports the worst coordinate") {
    RunResult r = run_cli("gradcheck --seed 1 --configs 1 --samples 8");
    REQUIRE(r.exit_code == 0);
    json j = json::parse(r.out);
    CHECK(j["pass"] == true);
    CHECK(j["max_rel_error"].get<double>() < 1e-3);
}

TEST_CASE("config errors exit with code 2") {
    CHECK(run_cli("solve --no-such-flag 1").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("eval --trials 10").exit_code == 2);   // missing required model path
    CHECK(run_cli("solve --domain marshes").exit_code == 2);
}

TEST_CASE("config files merge with flag overrides; unknown keys rejected") {
    const std::string cfg = temp_dir("cfg") + ".json";
    {
        std::ofstream f(cfg);
        f << R"({"domain": "grid", "n": 8, "trials": 10, "seed": 4})";
    }
    RunResult r = run_cli("solve --config " + cfg + " --trials 12");
    REQUIRE(r.exit_code == 0);
    json j = json::parse(r.out);
    CHECK(j["trials"] == 12);               // the flag wins
    CHECK(j["config"]["n"] == 8);           // file values echoed in the report
    {
        std::ofstream f(cfg);
        f << R"({"banana": 1})";
    }
    CHECK(run_cli("solve --config " + cfg).exit_code == 2);
    fs::remove(cfg);
}

TEST_CASE("help lists every key with its default") {
    const std::string cmd = std::string(QMDPNET_CLI_BIN) + " solve --help 2>&1";
    std::array<char, 4096> buf{};
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    CHECK(WEXITSTATUS(pclose(pipe)) == 0);
    for (const char* key : {"--domain", "--variant", "--n", "--trials", "--seed", "--threads"})
        CHECK(out.find(key) != std::string::npos);
    CHECK(out.find("default") != std::string::npos);
}

TEST_CASE("viz with injected weights writes images and a manifest") {
    const std::string out = temp_dir("viz");
    RunResult r = run_cli("viz --inject true --domain grid --n 6 --variant det --steps 3 --seed 5 --out " + out);
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(out + "/manifest.json"));
    CHECK(fs::exists(out + "/value_function.pgm"));
    CHECK(fs::exists(out + "/value_function.csv"));
    fs::remove_all(out);
}

TEST_CASE("hallway-variant datasets generate through the CLI") {
    const std::string out = temp_dir("hw2");
    RunResult r = run_cli(std::string("gen --domain hallway2grid --hallway2-pomdp ") +
                          QMDPNET_DATA_DIR +
                          "/hallway2.pomdp --envs 6 --trajs 1 --seed 2 --keep-failures true --out " +
                          out);
    REQUIRE(r.exit_code == 0);
    json j = json::parse(r.out);
    CHECK(j["env_count"] == 6);
    CHECK(fs::exists(out + "/manifest.json"));
    fs::remove_all(out);
}
