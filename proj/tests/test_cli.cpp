#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hiddenscan/cli.hpp"
#include "hiddenscan/report.hpp"

using namespace hiddenscan;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = HIDDENSCAN_SCENARIO_DIR;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run_inline(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Runs the installed binary with stdout and stderr captured separately.
Run run_binary(const std::vector<std::string>& args) {
  char tmpl[] = "/tmp/hiddenscan-cli-XXXXXX";
  const fs::path dir = mkdtemp(tmpl);
  const auto out_path = dir / "out";
  const auto err_path = dir / "err";
  Run r;
  std::fflush(stdout);
  std::cout.flush();
  pid_t child = fork();
  if (child == 0) {
    if (!freopen(out_path.c_str(), "w", stdout) || !freopen(err_path.c_str(), "w", stderr)) _exit(127);
    std::vector<char*> argv;
    std::string exe = HIDDENSCAN_CLI_PATH;
    argv.push_back(exe.data());
    std::vector<std::string> copy = args;
    for (auto& a : copy) argv.push_back(a.data());
    argv.push_back(nullptr);
    execv(exe.c_str(), argv.data());
    _exit(127);
  }
  int status = 0;
  waitpid(child, &status, 0);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  fs::remove_all(dir);
  return r;
}

}  // namespace

TEST_CASE("clean fixture scans exit 0") {
  auto r = run_binary({"scan", "--checks", "proc,sys", "--fixture", kScenarios + "/clean-01-generated.yaml"});
  CHECK(r.code == kExitClean);
  CHECK(r.out.rfind("format: v1\n", 0) == 0);
  CHECK(verify_integrity(r.out).ok());
}

TEST_CASE("a hidden process exits 1 and is reported") {
  auto r = run_binary({"scan", "--fixture", kScenarios + "/single-01-hide-from-listing.yaml"});
  CHECK(r.code == kExitAnomalies);
  CHECK(r.out.find("Found HIDDEN PID: 20011\n") != std::string::npos);
}

TEST_CASE("a full sweep of 2^22 pids needs the budget override") {
  auto r = run_binary({"scan", "--checks", "brute", "--fixture", kScenarios + "/clean-02-paper-scale.yaml"});
  CHECK(r.code == kExitError);
  CHECK(r.err.find("--budget-override") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("simulate over the shipped scenarios") {
  auto r = run_binary({"simulate", kScenarios});
  CHECK(r.code == kExitClean);
  CHECK(r.out.find("FAIL ") == std::string::npos);
  CHECK(r.out.find(" failed: 0 mismatches: 0\n") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run_binary({"scan", "--no-such-flag"}).code == kExitError);
  CHECK(run_binary({}).code == kExitError);
  CHECK(run_inline({"scan", "--checks", "proc,teleport"}).code == kExitError);
  CHECK(run_inline({"scan", "--checks", ""}).code == kExitError);
  CHECK(run_inline({"scan", "--output", "xml"}).code == kExitError);
  CHECK(run_inline({"scan", "--rounds", "0"}).code == kExitError);
  CHECK(run_inline({"simulate"}).code == kExitError);
  CHECK(run_inline({"scan", "--fixture", "/nonexistent.yaml"}).code == kExitError);
  auto r = run_inline({"scan", "--allowlist", "/nonexistent"});
  CHECK(r.code == kExitError);
  CHECK(r.err.find("allowlist") != std::string::npos);
}

TEST_CASE("machine output keeps stdout to the report alone") {
  auto r = run_binary({"scan", "--output", "machine", "--fixture", kScenarios + "/single-04-ghost-entry.yaml"});
  CHECK(r.code == kExitAnomalies);
  CHECK(verify_machine(r.out).ok());
  auto parsed = parse_machine(r.out);
  REQUIRE(parsed);
  CHECK_FALSE(parsed->anomalies.empty());
}

TEST_CASE("identical arguments give identical bytes") {
  const std::vector<std::string> args{"scan", "--output", "machine", "--workers", "3", "--fixture",
                                      kScenarios + "/paper-05-bind-proc.yaml"};
  auto a = run_binary(args);
  auto b = run_binary(args);
  CHECK(a.code == b.code);
  CHECK(a.out == b.out);
  auto serial = args;
  serial[4] = "1";
  CHECK(run_binary(serial).out == a.out);
}

TEST_CASE("the delivered text is what the filter leaves") {
  auto r = run_inline({"scan", "--budget-override", "--fixture", kScenarios + "/paper-03-output-filter.yaml"});
  CHECK(r.code == kExitAnomalies);
  CHECK(r.out.find("Found HIDDEN PID") == std::string::npos);
  CHECK_FALSE(verify_integrity(r.out).ok());
}

TEST_CASE("audit and calibrate against fixtures") {
  auto a = run_inline({"audit", "--fixture", kScenarios + "/clean-03-preload-active.yaml"});
  CHECK(a.code == kExitAnomalies);
  CHECK(a.out.find("PreloadEnvActive: LD_PRELOAD [Confirmed]") != std::string::npos);
  auto c = run_inline({"calibrate", "--samples", "5", "--fixture", kScenarios + "/clean-01-generated.yaml"});
  CHECK(c.code == kExitClean);
  CHECK(c.out.find("samples: 5\n") != std::string::npos);
  CHECK(c.out.find("suggested: --latency-baseline ") != std::string::npos);
  CHECK(run_inline({"calibrate", "--samples", "0", "--fixture", kScenarios + "/clean-01-generated.yaml"}).code ==
        kExitError);
}

TEST_CASE("version and help") {
  auto v = run_inline({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("hiddenscan") != std::string::npos);
  auto h = run_inline({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("simulate") != std::string::npos);
}
