#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "hiddenscan/report.hpp"

using namespace hiddenscan;
using namespace testutil;

namespace {

ScanReport sample_report() {
  ScanReport r;
  r.header.tool_version = "hiddenscan 1.0.0";
  r.header.scanner_pid = 2000;
  r.header.parent_pid = 1;
  r.header.namespaces = kInitNamespaces;
  r.header.stdout_info = {DescriptorKind::Terminal, "/dev/pts/9"};
  r.header.started = 1700000000;
  r.header.finished = 1700000002;
  Anomaly hidden{AnomalyKind::HiddenFromListing, "9854",
                 {{"proc/stat", "alive", "listed in /proc"}, {"sys/getsid", "alive", "listed in /proc"}},
                 Confidence::Confirmed};
  Anomaly count{AnomalyKind::ProcessCountMismatch, "process-count",
                {{"count/listed-vs-kernel", "160 listed tasks", "161 kernel tasks"}}, Confidence::Confirmed};
  Anomaly odd{AnomalyKind::OutputNotTerminal, "stdout", {{"output/stdout", "line\nbreak", "a terminal"}},
              Confidence::Suspicious};
  r.anomalies = {hidden, count, odd};
  r.counters = {160, 4194004, 46134044};
  r.partial = {"reverse: ViewUnavailable: x"};
  return r;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto nl = s.find('\n', pos);
    out.push_back(s.substr(pos, nl == std::string::npos ? std::string::npos : nl + 1 - pos));
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("sha256 matches the FIPS 180-2 vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("iso_utc") {
  CHECK(iso_utc(0) == "1970-01-01T00:00:00Z");
  CHECK(iso_utc(1700000000) == "2023-11-14T22:13:20Z");
}

TEST_CASE("line trail has one byte per line") {
  CHECK(line_trail("").empty());
  CHECK(line_trail("a\nb\nc\n").size() == 6);
  CHECK(line_trail("a\nb\nc").size() == 6);
  // Chaining: the same line at a different position digests differently.
  CHECK(line_trail("a\na\n").substr(0, 2) != line_trail("a\na\n").substr(2, 2));
}

TEST_CASE("text report layout") {
  const auto text = render_text(sample_report());
  const auto lines = split_lines(text);
  REQUIRE(lines.size() == 19);
  CHECK(lines[0] == "format: v1\n");
  CHECK(lines[1] == "tool: hiddenscan 1.0.0\n");
  CHECK(lines[4] == "namespaces: pid:[4026531836] mnt:[4026531841] user:[4026531837]\n");
  CHECK(lines[5] == "stdout: /dev/pts/9 (terminal)\n");
  CHECK(lines[6] == "started: 2023-11-14T22:13:20Z\n");
  CHECK(lines[8] == "partial: reverse: ViewUnavailable: x\n");
  CHECK(lines[9] == "Found HIDDEN PID: 9854\n");
  CHECK(lines[10] == "\tconfidence: Confirmed\n");
  CHECK(lines[11] == "\tproc/stat: alive (expected listed in /proc)\n");
  CHECK(lines[13] == "ProcessCountMismatch: process-count [Confirmed]\n");
  CHECK(lines[16] == "\toutput/stdout: line\\nbreak (expected a terminal)\n");
  CHECK(lines[17] == "counters: pids-listed=160 pids-probed=4194004 probes-issued=46134044\n");
  CHECK(lines[18].rfind("integrity: lines=18 bytes=", 0) == 0);
  CHECK(lines[18].find("(tamper-evident, not tamper-proof)\n") != std::string::npos);
  CHECK(verify_integrity(text).ok());
}

TEST_CASE("an empty report still carries header, counters and integrity") {
  ScanReport r;
  const auto text = render_text(r);
  CHECK(text.find("namespaces: unavailable\n") != std::string::npos);
  CHECK(text.find("Found HIDDEN PID") == std::string::npos);
  CHECK(split_lines(text).size() == 10);
  CHECK(verify_integrity(text).ok());
  const auto machine = render_machine(r);
  CHECK(split_lines(machine).size() == 1);
  CHECK(verify_machine(machine).ok());
  auto back = parse_machine(machine);
  REQUIRE(back);
  CHECK(*back == r);
}

TEST_CASE("rendering is deterministic") {
  CHECK(render_text(sample_report()) == render_text(sample_report()));
  CHECK(render_machine(sample_report()) == render_machine(sample_report()));
}

TEST_CASE("deleting the finding line is detected and located") {
  const auto text = render_text(sample_report());
  const auto at = text.find("Found HIDDEN PID: 9854\n");
  REQUIRE(at != std::string::npos);
  std::string cut = text;
  cut.erase(at, std::string("Found HIDDEN PID: 9854\n").size());
  auto v = verify_integrity(cut);
  CHECK(v.status == IntegrityStatus::Tampered);
  REQUIRE(v.first_bad_offset);
  CHECK(*v.first_bad_offset == at);
}

TEST_CASE("dropping or truncating the integrity line") {
  const auto text = render_text(sample_report());
  const auto last = text.rfind('\n', text.size() - 2) + 1;
  CHECK(verify_integrity(text.substr(0, last)).status == IntegrityStatus::MissingIntegrityLine);
  CHECK(verify_integrity(text.substr(0, text.size() - 1)).status == IntegrityStatus::Tampered);
  CHECK(verify_integrity("").status == IntegrityStatus::MissingIntegrityLine);
  CHECK(to_string(IntegrityStatus::Intact) == "intact");
}

TEST_CASE("random single-byte edits never verify") {
  const auto text = render_text(sample_report());
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    std::string t = text;
    const auto pos = rng() % t.size();
    switch (rng() % 3) {
      case 0: {
        char c = static_cast<char>(rng() % 256);
        if (c == t[pos]) c = static_cast<char>(c ^ 1);
        t[pos] = c;
        break;
      }
      case 1: t.erase(pos, 1); break;
      default: t.insert(pos, 1, static_cast<char>(rng() % 256)); break;
    }
    CAPTURE(pos);
    CHECK_FALSE(verify_integrity(t).ok());
  }
}

TEST_CASE("machine format round-trips") {
  const auto r = sample_report();
  const auto machine = render_machine(r);
  const auto lines = split_lines(machine);
  REQUIRE(lines.size() == r.anomalies.size() + 1);
  for (const auto& l : lines) CHECK(l.rfind("{\"format\":\"v1\"", 0) == 0);
  CHECK(lines[0].find("\"record\":\"anomaly\"") != std::string::npos);
  CHECK(lines.back().find("\"digest\":\"sha256:") != std::string::npos);
  CHECK(verify_machine(machine).ok());
  auto back = parse_machine(machine);
  REQUIRE(back);
  CHECK(*back == r);
  CHECK(render_machine(*back) == machine);
}

TEST_CASE("machine format tampering") {
  const auto machine = render_machine(sample_report());
  const auto lines = split_lines(machine);
  std::string dropped;
  for (std::size_t i = 1; i < lines.size(); ++i) dropped += lines[i];
  CHECK(verify_machine(dropped).status == IntegrityStatus::Tampered);
  CHECK_FALSE(parse_machine(dropped));
  std::string edited = machine;
  edited.replace(edited.find("9854"), 4, "9855");
  CHECK_FALSE(verify_machine(edited).ok());
  CHECK(verify_machine(machine.substr(0, machine.size() - 1)).status == IntegrityStatus::MissingIntegrityLine);
  CHECK(verify_machine(lines[0]).status == IntegrityStatus::MissingIntegrityLine);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    std::string t = machine;
    const auto pos = rng() % t.size();
    t[pos] = static_cast<char>(t[pos] ^ static_cast<char>(1 + rng() % 255));
    CAPTURE(pos);
    CHECK_FALSE(verify_machine(t).ok());
  }
}

TEST_CASE("text and machine integrity checkers reject each other's format") {
  CHECK_FALSE(verify_integrity(render_machine(sample_report())).ok());
  CHECK_FALSE(verify_machine(render_text(sample_report())).ok());
}
