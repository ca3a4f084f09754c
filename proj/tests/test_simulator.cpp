#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "hiddenscan/procfs.hpp"

using namespace hiddenscan;
using namespace testutil;

namespace {

SystemModel small() {
  auto a = proc(400);
  a.threads = {Pid{401}};
  auto m = make_model({a, proc(800, 400), proc(1200)}, Pid{2000}, 4096);
  m.directories["/srv"] = {{"a", 10, FileKind::Directory}, {"f", 11, FileKind::Regular}};
  m.directories["/srv/a"] = {};
  m.env_of_scanner = {"HOME=/root", "LD_PRELOAD=/lib/x.so"};
  return m;
}

std::vector<std::string> names(const Result<std::vector<DirEntry>>& r) {
  std::vector<std::string> out;
  if (!r) return {"<" + std::string(to_string(r.error().code)) + ">"};
  for (const auto& e : *r) out.push_back(e.name + ":" + std::string(to_string(e.kind)));
  return out;
}

template <typename T>
std::string text(const Result<T>& r) {
  if (!r) return "<" + std::string(to_string(r.error().code)) + ">";
  std::ostringstream s;
  if constexpr (std::is_same_v<T, std::string>) {
    s << *r;
  } else if constexpr (std::is_same_v<T, NamespaceIds>) {
    s << r->pid_ns << "/" << r->mnt_ns << "/" << r->user_ns;
  } else if constexpr (std::is_same_v<T, PathStat>) {
    s << to_string(r->kind) << " " << r->nlink << " " << r->inode << " " << r->fs_magic;
  } else {
    s << *r;
  }
  return s.str();
}

// Everything a scanner can observe, grouped by the channel it travels on.
std::map<std::string, std::string> channels(const SystemView& v, const SystemModel& m) {
  std::map<std::string, std::ostringstream> ch;
  const std::int64_t top = m.pid_max + 2;
  for (const auto& n : names(v.list_dir("/proc"))) ch["listing"] << n << ",";
  for (const auto& n : names(v.list_dir("/proc"))) ch["listing"] << n << ",";
  for (std::int64_t p = 0; p <= top; ++p) {
    for (auto k : kFilesystemProbes) {
      auto r = v.probe_pid(Pid{p}, k);
      if (r && r->verdict != Verdict::Absent) ch["probes-fs"] << p << to_string(k) << to_string(r->verdict) << ",";
    }
    for (auto k : kSyscallProbes) {
      auto r = v.probe_pid(Pid{p}, k);
      if (r && r->verdict != Verdict::Absent) ch["probes-sys"] << p << to_string(k) << to_string(r->verdict) << ",";
    }
    auto c = v.claim_pid(Pid{p});
    if (c != PidClaim::Claimable) ch["claims"] << p << ":" << static_cast<int>(c) << ",";
  }
  for (auto p : brute_oracle(m)) {
    for (const char* f : {"status", "stat", "cmdline", "ns/pid", "ns/mnt", "ns/user"}) {
      ch["proc-files"] << p.value << f << text(v.read_proc_file(p, f)) << ",";
    }
  }
  ch["pid-max"] << text(v.pid_max()) << text(v.pid_max_reread());
  ch["count"] << text(v.process_count_estimate());
  auto mounts = v.mounts();
  if (mounts) {
    for (const auto& e : *mounts) ch["mounts"] << e.mount_point << e.fs_type << e.root << e.fs_magic << e.flags << ",";
  }
  ch["mounts"] << text(v.stat_path("/proc"));
  ch["identity"] << v.self_pid().value << " " << v.parent_pid() << " " << text(v.self_namespaces());
  for (const auto& e : v.scanner_environment()) ch["env"] << e << ",";
  ch["env"] << text(v.read_file("/etc/ld.so.preload"));
  ch["trace"] << static_cast<int>(v.attempt_self_trace().status);
  for (auto s : v.sample_syscall_latency(3)) ch["trace"] << "," << s;
  for (const auto& [path, entries] : m.directories) {
    for (const auto& n : names(v.list_dir(path))) ch["dirents"] << path << "/" << n << ",";
    ch["dirents"] << text(v.stat_path(path));
  }
  ch["output"] << v.descriptors().stdout_info().identity;
  std::map<std::string, std::string> out;
  for (auto& [k, s] : ch) out[k] = s.str();
  return out;
}

std::map<std::string, std::string> channels_with(const SystemModel& m, std::vector<EvasionTransform> ts) {
  SimulatedView v(m, std::move(ts));
  auto out = channels(v, m);
  out["delivered"] = v.deliver("Found HIDDEN PID: 400\nline two\ncounters: x\n");
  // The scanner's own status line carries TracerPid.
  out["trace"] += text(v.read_proc_file(v.self_pid(), "status"));
  return out;
}

std::set<std::string> changed(const std::map<std::string, std::string>& a, const std::map<std::string, std::string>& b) {
  std::set<std::string> out;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it == b.end() || it->second != v) out.insert(k);
  }
  for (const auto& [k, v] : b) {
    if (!a.count(k)) out.insert(k);
  }
  return out;
}

// Channels each single-effect transform may touch. "trace" also covers the
// scanner's status file, which lives in proc-files.
struct Local {
  EvasionTransform t;
  std::set<std::string> allowed;
};

std::vector<Local> local_transforms() {
  return {
      {HideFromListing{Pid{800}}, {"listing"}},
      {FailProbes{Pid{800}, ProbeSet(kSyscallProbes)}, {"probes-sys"}},
      {FailProbes{Pid{800}, ProbeSet(kFilesystemProbes)}, {"probes-fs"}},
      {VforkClaim{Pid{800}}, {"claims"}},
      {GhostEntry{Pid{3000}}, {"listing"}},
      {PidMaxTruncated{1000}, {"pid-max"}},
      {EnvStrip{"LD_PRELOAD"}, {"env"}},
      {OutputFilter{"^Found"}, {"delivered"}},
      {TamperGetdents{"/srv", "a"}, {"dirents"}},
      {FakeTracerPid{77}, {"trace", "proc-files"}},
  };
}

}  // namespace

TEST_CASE("untransformed view mirrors the model") {
  auto m = small();
  SimulatedView v(m, {});
  auto pids = list_proc_pids(v);
  REQUIRE(pids);
  CHECK(*pids == brute_oracle(m));
  CHECK(v.probe_pid(Pid{401}, ProbeKind::KillZero)->verdict == Verdict::Alive);
  CHECK(v.probe_pid(Pid{402}, ProbeKind::KillZero)->verdict == Verdict::Absent);
  auto status = v.read_proc_file(Pid{401}, "status");
  REQUIRE(status);
  CHECK(procfs::status_int(*status, "Tgid") == 400);
  CHECK(procfs::status_int(*v.read_proc_file(Pid{400}, "status"), "Threads") == 2);
  CHECK(v.claim_pid(Pid{400}) == PidClaim::InUse);
  CHECK(v.claim_pid(Pid{402}) == PidClaim::Claimable);
  CHECK(v.claim_pid(Pid{0}) == PidClaim::Unsupported);
  CHECK(v.claim_pid(Pid{4097}) == PidClaim::Unsupported);
  CHECK(v.self_pid() == Pid{2000});
  CHECK(*v.process_count_estimate() == m.task_count());
  CHECK(v.attempt_self_trace().status == SelfTraceStatus::Untraced);
  CHECK(v.deliver("a\nb\n") == "a\nb\n");
}

TEST_CASE("HideFromListing removes the pid from enumeration only") {
  auto m = small();
  SimulatedView v(m, {HideFromListing{Pid{800}}});
  auto pids = list_proc_pids(v);
  REQUIRE(pids);
  CHECK(std::find(pids->begin(), pids->end(), Pid{800}) == pids->end());
  for (auto k : kAllProbes) CHECK(v.probe_pid(Pid{800}, k)->verdict == Verdict::Alive);
  CHECK(v.read_proc_file(Pid{800}, "status"));
}

TEST_CASE("FailProbes answers ESRCH on the chosen probes") {
  auto m = small();
  ProbeSet s;
  s.insert(ProbeKind::GetSid);
  SimulatedView v(m, {FailProbes{Pid{800}, s}});
  CHECK(v.probe_pid(Pid{800}, ProbeKind::GetSid)->verdict == Verdict::Absent);
  CHECK(v.probe_pid(Pid{800}, ProbeKind::GetPgid)->verdict == Verdict::Alive);
}

TEST_CASE("VforkClaim, GhostEntry and PidMaxTruncated") {
  auto m = small();
  SimulatedView v(m, {VforkClaim{Pid{800}}, GhostEntry{Pid{3000}}, PidMaxTruncated{1000}});
  CHECK(v.claim_pid(Pid{800}) == PidClaim::Claimable);
  auto pids = list_proc_pids(v);
  CHECK(std::find(pids->begin(), pids->end(), Pid{3000}) != pids->end());
  CHECK(v.probe_pid(Pid{3000}, ProbeKind::KillZero)->verdict == Verdict::Absent);
  CHECK(v.claim_pid(Pid{3000}) == PidClaim::Claimable);
  CHECK(*v.pid_max() == 1000);
  CHECK(*v.pid_max_reread() == 1000);
  // The kernel still hands out ids up to the real limit.
  CHECK(v.claim_pid(Pid{1200}) == PidClaim::InUse);
}

TEST_CASE("BindMountProc overlays /proc with symlinks") {
  auto m = small();
  SimulatedView v(m, {BindMountProc{Pid{800}, false}});
  auto entries = v.list_dir("/proc");
  REQUIRE(entries);
  std::set<std::string> seen;
  for (const auto& e : *entries) {
    if (parse_pid_name(e.name)) {
      CHECK(e.kind == FileKind::Symlink);
      seen.insert(e.name);
    }
  }
  CHECK_FALSE(seen.count("800"));
  CHECK(seen.count("400"));
  CHECK(v.probe_pid(Pid{800}, ProbeKind::Stat)->verdict == Verdict::Absent);
  CHECK(v.probe_pid(Pid{800}, ProbeKind::KillZero)->verdict == Verdict::Alive);
  CHECK(v.self_namespaces()->mnt_ns != kInitNamespaces.mnt_ns);
  CHECK(v.self_namespaces()->pid_ns == kInitNamespaces.pid_ns);
  auto mounts = v.mounts();
  REQUIRE(mounts);
  CHECK(mounts->back().mount_point == "/proc");
  CHECK(mounts->back().fs_type == "tmpfs");
  CHECK(v.stat_path("/proc")->fs_magic == kTmpfsMagic);
}

TEST_CASE("PidNamespaceSwap renumbers the visible set from 1") {
  auto m = small();
  SimulatedView v(m, {PidNamespaceSwap{{Pid{2000}, Pid{400}}}});
  CHECK(v.self_pid() == Pid{1});
  CHECK(v.parent_pid() == 0);
  CHECK(v.local_pid(Pid{2000}) == Pid{1});
  CHECK(v.local_pid(Pid{400}) == Pid{2});
  CHECK(v.local_pid(Pid{401}) == Pid{3});
  CHECK_FALSE(v.local_pid(Pid{800}));
  auto pids = list_proc_pids(v);
  REQUIRE(pids);
  CHECK(*pids == std::vector<Pid>{Pid{1}, Pid{2}});
  CHECK(v.probe_pid(Pid{800}, ProbeKind::KillZero)->verdict == Verdict::Absent);
  CHECK(v.self_namespaces()->pid_ns != kInitNamespaces.pid_ns);
  // Kernel-wide counters are not namespaced.
  CHECK(*v.process_count_estimate() == m.task_count());
}

TEST_CASE("EnvStrip, OutputFilter, TamperGetdents, FakeTracerPid") {
  auto m = small();
  m.tracers[Pid{2000}] = Pid{1200};
  SimulatedView v(m, {EnvStrip{"LD_PRELOAD"}, OutputFilter{"^Found HIDDEN"}, TamperGetdents{"/srv", "f"},
                      FakeTracerPid{0}});
  CHECK(v.scanner_environment() == std::vector<std::string>{"HOME=/root", "xD_PRELOAD=/lib/x.so"});
  CHECK(v.deliver("Found HIDDEN PID: 1\nkeep\n") == "keep\n");
  auto srv = v.list_dir("/srv");
  REQUIRE(srv);
  CHECK(std::none_of(srv->begin(), srv->end(), [](const DirEntry& e) { return e.name == "f"; }));
  CHECK(v.stat_path("/srv/f"));
  CHECK(procfs::status_int(*v.read_proc_file(Pid{2000}, "status"), "TracerPid") == 0);
  CHECK(v.attempt_self_trace().status == SelfTraceStatus::Untraced);
  auto lat = v.sample_syscall_latency(5);
  CHECK(lat.front() == m.latency.base_ns * m.latency.traced_factor);
}

TEST_CASE("apply_output_filters deletes whole lines") {
  std::vector<EvasionTransform> ts{OutputFilter{"^a"}, OutputFilter{"z$"}};
  CHECK(apply_output_filters("abc\nxyz\nmid\n", ts) == "mid\n");
  CHECK(apply_output_filters("keep", ts) == "keep");
  CHECK(apply_output_filters("", ts).empty());
}

TEST_CASE("transient pids appear in the first enumeration only") {
  auto m = small();
  m.transient = {Pid{3333}};
  SimulatedView v(m, {});
  auto first = list_proc_pids(v);
  auto second = list_proc_pids(v);
  CHECK(std::find(first->begin(), first->end(), Pid{3333}) != first->end());
  CHECK(std::find(second->begin(), second->end(), Pid{3333}) == second->end());
  CHECK(v.probe_pid(Pid{3333}, ProbeKind::KillZero)->verdict == Verdict::Absent);
}

TEST_CASE("invalid transforms are rejected") {
  auto m = small();
  auto bad = [&](EvasionTransform t) { CHECK_THROWS_AS(SimulatedView(m, {t}), InvalidTransform); };
  bad(HideFromListing{Pid{999}});
  bad(HideFromListing{Pid{401}});
  bad(FailProbes{Pid{800}, ProbeSet{}});
  bad(GhostEntry{Pid{800}});
  bad(GhostEntry{Pid{401}});
  bad(GhostEntry{Pid{0}});
  bad(PidMaxTruncated{0});
  bad(PidNamespaceSwap{{Pid{400}}});
  bad(PidNamespaceSwap{{Pid{2000}, Pid{999}}});
  bad(EnvStrip{""});
  bad(OutputFilter{"(unclosed"});
  bad(TamperGetdents{"/nowhere", "x"});
  bad(TamperGetdents{"/srv", "a/b"});
  bad(FakeTracerPid{-1});
  CHECK_THROWS_AS(SimulatedView(m, {PidNamespaceSwap{{Pid{2000}}}, PidNamespaceSwap{{Pid{2000}}}}), InvalidTransform);
  CHECK_THROWS_AS(SimulatedView(m, {BindMountProc{Pid{800}}, PidNamespaceSwap{{Pid{2000}}}}), InvalidTransform);
  CHECK_THROWS_AS(SimulatedView(m, {PidNamespaceSwap{{Pid{2000}}}, HideFromListing{Pid{800}}}), InvalidTransform);
}

TEST_CASE("transform names and descriptions") {
  CHECK(transform_name(HideFromListing{Pid{5}}) == "HideFromListing");
  CHECK(describe(HideFromListing{Pid{5}}) == "HideFromListing(5)");
  CHECK(transform_name(FakeTracerPid{0}) == "FakeTracerPid");
  CHECK(describe(FakeTracerPid{0}) == "FakeTracerPid(0)");
}

TEST_CASE("each transform changes only its own channels") {
  auto m = small();
  const auto plain = channels_with(m, {});
  for (const auto& l : local_transforms()) {
    CAPTURE(describe(l.t));
    auto diff = changed(plain, channels_with(m, {l.t}));
    CHECK_FALSE(diff.empty());
    for (const auto& c : diff) CHECK_MESSAGE(l.allowed.count(c), c);
  }
}

TEST_CASE("transforms on disjoint channels commute") {
  auto m = small();
  auto ls = local_transforms();
  for (std::size_t i = 0; i < ls.size(); ++i) {
    for (std::size_t j = i + 1; j < ls.size(); ++j) {
      std::set<std::string> shared;
      std::set_intersection(ls[i].allowed.begin(), ls[i].allowed.end(), ls[j].allowed.begin(), ls[j].allowed.end(),
                            std::inserter(shared, shared.end()));
      if (!shared.empty()) continue;
      CAPTURE(describe(ls[i].t));
      CAPTURE(describe(ls[j].t));
      CHECK(channels_with(m, {ls[i].t, ls[j].t}) == channels_with(m, {ls[j].t, ls[i].t}));
    }
  }
}

TEST_CASE("generate_model") {
  auto a = generate_model(7, 447);
  auto b = generate_model(7, 447);
  CHECK(a == b);
  CHECK(a.processes.size() == 447);
  CHECK(generate_model(8, 447) != a);
  CHECK(a.processes.front().pid == Pid{1});
  CHECK(a.scanner == a.processes.back().pid);
  std::set<std::int64_t> pids;
  for (const auto& p : a.processes) pids.insert(p.pid.value);
  for (const auto& p : a.processes) {
    if (p.pid.value != 1) CHECK(pids.count(p.ppid.value));
    CHECK(p.pid.value <= a.pid_max);
  }
  auto one = generate_model(3, 1);
  CHECK(one.processes.size() == 1);
  CHECK(one.scanner == Pid{1});
  CHECK_NOTHROW(SimulatedView(generate_model(9, 2000, 1 << 22), {}));
}

TEST_CASE("brute_oracle agrees with list_proc_pids on random clean models") {
  std::mt19937_64 rng(12345);
  for (int i = 0; i < 30; ++i) {
    const auto size = static_cast<std::size_t>(1 + rng() % 600);
    auto m = generate_model(rng(), size);
    SimulatedView v(m, {});
    CHECK(*list_proc_pids(v) == brute_oracle(m));
  }
}
