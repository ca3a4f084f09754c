#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "hiddenscan/sweep.hpp"

using namespace hiddenscan;
using namespace testutil;

namespace {

// Forwards to a simulated view but fails /proc enumeration.
class NoProcView : public SystemView {
 public:
  explicit NoProcView(std::shared_ptr<SimulatedView> inner) : in_(std::move(inner)) {}
  Result<std::vector<DirEntry>> list_dir(const std::string& path) const override {
    if (path == "/proc") return make_error(Errc::ViewUnavailable, "/proc unreadable");
    return in_->list_dir(path);
  }
  Result<ProbeOutcome> probe_pid(Pid pid, ProbeKind kind) const override { return in_->probe_pid(pid, kind); }
  Result<std::string> read_proc_file(Pid pid, std::string_view name) const override {
    return in_->read_proc_file(pid, name);
  }
  Result<std::string> read_file(const std::string& path) const override { return in_->read_file(path); }
  Result<PathStat> stat_path(const std::string& path) const override { return in_->stat_path(path); }
  Result<std::vector<MountEntry>> mounts() const override { return in_->mounts(); }
  Result<NamespaceIds> self_namespaces() const override { return in_->self_namespaces(); }
  Result<std::int64_t> pid_max() const override { return in_->pid_max(); }
  Result<std::int64_t> pid_max_reread() const override { return in_->pid_max_reread(); }
  Result<std::int64_t> process_count_estimate() const override { return in_->process_count_estimate(); }
  PidClaim claim_pid(Pid pid) const override { return in_->claim_pid(pid); }
  Pid self_pid() const override { return in_->self_pid(); }
  std::int64_t parent_pid() const override { return in_->parent_pid(); }
  std::vector<std::string> scanner_environment() const override { return in_->scanner_environment(); }
  std::string self_executable() const override { return in_->self_executable(); }
  SelfTraceResult attempt_self_trace() const override { return in_->attempt_self_trace(); }
  std::vector<std::int64_t> sample_syscall_latency(int n) const override { return in_->sample_syscall_latency(n); }
  DescriptorState descriptors() const override { return in_->descriptors(); }
  std::int64_t now() const override { return in_->now(); }

 private:
  std::shared_ptr<SimulatedView> in_;
};

SystemModel small_model() { return make_model({proc(400), proc(555), proc(1200), proc(3000, 555)}, Pid{5000}, 32768); }

ScanConfig only(Family f, const SystemModel& m) {
  ScanConfig cfg = sim_config(m);
  cfg.families = {f};
  return cfg;
}

}  // namespace

TEST_CASE("summarize") {
  using PO = ProbeOutcome;
  CHECK(summarize(Pid{5}, {PO::alive(ProbeKind::Stat)}).verdict == SummaryVerdict::Alive);
  CHECK(summarize(Pid{5}, {PO::denied(ProbeKind::KillZero)}).verdict == SummaryVerdict::Alive);
  CHECK(summarize(Pid{5}, {PO::absent(ProbeKind::Stat), PO::absent(ProbeKind::GetSid)}).verdict ==
        SummaryVerdict::Absent);
  CHECK(summarize(Pid{5}, {PO::alive(ProbeKind::Stat), PO::absent(ProbeKind::GetSid)}).verdict ==
        SummaryVerdict::Contradictory);
  CHECK(summarize(Pid{5}, {PO::inconclusive(ProbeKind::Stat)}).verdict == SummaryVerdict::Absent);
  CHECK(summarize(Pid{5}, {}).verdict == SummaryVerdict::Absent);
}

TEST_CASE("config validation") {
  ScanConfig cfg;
  CHECK_FALSE(cfg.validate());
  cfg.min_pid = 1;
  CHECK(cfg.validate());
  cfg = {};
  cfg.double_check_rounds = 0;
  CHECK(cfg.validate());
  cfg = {};
  cfg.probe_set = ProbeSet(kFilesystemProbes);
  CHECK(cfg.validate());
  cfg.families = {Family::Proc, Family::Reverse};
  CHECK_FALSE(cfg.validate());
}

TEST_CASE("clean model: every family is silent") {
  auto m = small_model();
  SimulatedView v(m, {});
  for (auto f : kAllFamilies) {
    auto r = run_family(v, only(f, m), f);
    REQUIRE(r);
    CHECK_MESSAGE(r->anomalies.empty(), to_string(f));
  }
}

TEST_CASE("hidden pid: proc, sys and brute report it, reverse does not") {
  auto m = small_model();
  SimulatedView v(m, {HideFromListing{Pid{1200}}});
  for (auto f : {Family::Proc, Family::Sys, Family::Brute}) {
    auto r = run_family(v, only(f, m), f);
    REQUIRE(r);
    REQUIRE_MESSAGE(r->anomalies.size() == 1, to_string(f));
    const auto& a = r->anomalies[0];
    CHECK(a.kind == AnomalyKind::HiddenFromListing);
    CHECK(a.subject == "1200");
    CHECK(a.confidence == Confidence::Confirmed);
    CHECK(a.evidence.front().check.rfind(std::string(to_string(f)) + "/", 0) == 0);
  }
  auto r = scan_reverse(v, only(Family::Reverse, m));
  REQUIRE(r);
  CHECK(r->anomalies.empty());
}

TEST_CASE("proc family evidence names the probes that saw the pid") {
  auto m = small_model();
  SimulatedView v(m, {HideFromListing{Pid{1200}}});
  auto r = scan_proc(v, only(Family::Proc, m));
  REQUIRE(r);
  REQUIRE(r->anomalies.size() == 1);
  std::vector<std::string> checks;
  for (const auto& e : r->anomalies[0].evidence) checks.push_back(e.check);
  CHECK(checks == std::vector<std::string>{"proc/stat", "proc/chdir", "proc/opendir"});
}

TEST_CASE("partially failing battery on a hidden pid is contradictory") {
  auto m = small_model();
  ProbeSet fail;
  fail.insert(ProbeKind::GetPriority);
  SimulatedView v(m, {HideFromListing{Pid{1200}}, FailProbes{Pid{1200}, fail}});
  auto r = scan_sys(v, only(Family::Sys, m));
  REQUIRE(r);
  REQUIRE(r->anomalies.size() == 1);
  CHECK(r->anomalies[0].kind == AnomalyKind::ContradictoryProbes);
  // proc never reports contradictions.
  auto p = scan_proc(v, only(Family::Proc, m));
  REQUIRE(p);
  REQUIRE(p->anomalies.size() == 1);
  CHECK(p->anomalies[0].kind == AnomalyKind::HiddenFromListing);
}

TEST_CASE("pids below min_pid are not swept") {
  auto m = small_model();
  SimulatedView v(m, {HideFromListing{Pid{400}}});
  auto cfg = only(Family::Sys, m);
  cfg.min_pid = 401;
  auto r = scan_sys(v, cfg);
  REQUIRE(r);
  CHECK(r->anomalies.empty());
  cfg.min_pid = 400;
  r = scan_sys(v, cfg);
  REQUIRE(r);
  CHECK(r->anomalies.size() == 1);
}

TEST_CASE("brute claims") {
  auto m = small_model();
  SUBCASE("vfork collision on a listed pid") {
    SimulatedView v(m, {VforkClaim{Pid{555}}});
    auto r = scan_brute(v, only(Family::Brute, m));
    REQUIRE(r);
    REQUIRE(r->anomalies.size() == 1);
    CHECK(r->anomalies[0].kind == AnomalyKind::ContradictoryProbes);
    CHECK(r->anomalies[0].subject == "555");
  }
  SUBCASE("hidden and claimable is invisible") {
    SimulatedView v(m, {HideFromListing{Pid{555}}, VforkClaim{Pid{555}}});
    auto r = scan_brute(v, only(Family::Brute, m));
    REQUIRE(r);
    CHECK(r->anomalies.empty());
  }
}

TEST_CASE("reverse: ghost entries and probe-blind listed pids") {
  auto m = small_model();
  SimulatedView ghost(m, {GhostEntry{Pid{777}}});
  auto r = scan_reverse(ghost, only(Family::Reverse, m));
  REQUIRE(r);
  REQUIRE(r->anomalies.size() == 1);
  CHECK(r->anomalies[0].kind == AnomalyKind::GhostListing);
  CHECK(r->anomalies[0].subject == "777");
  CHECK(r->anomalies[0].evidence.size() == kProbeKindCount);

  ProbeSet some;
  some.insert(ProbeKind::KillZero);
  SimulatedView partial(m, {FailProbes{Pid{555}, some}});
  r = scan_reverse(partial, only(Family::Reverse, m));
  REQUIRE(r);
  REQUIRE(r->anomalies.size() == 1);
  CHECK(r->anomalies[0].kind == AnomalyKind::ContradictoryProbes);
}

TEST_CASE("a pid that exits between rounds is dropped by the double check") {
  auto m = small_model();
  m.transient = {Pid{2500}};
  auto cfg = only(Family::Reverse, m);
  cfg.double_check_rounds = 1;
  {
    SimulatedView v(m, {});
    auto r = scan_reverse(v, cfg);
    REQUIRE(r);
    CHECK(subjects(r->anomalies) == std::vector<std::string>{"2500"});
  }
  cfg.double_check_rounds = 2;
  SimulatedView v(m, {});
  auto r = scan_reverse(v, cfg);
  REQUIRE(r);
  CHECK(r->anomalies.empty());
}

TEST_CASE("threads") {
  auto leader = proc(1200);
  leader.threads = {Pid{1201}, Pid{1202}};
  auto m = make_model({proc(400), leader}, Pid{5000}, 8192);
  SUBCASE("threads of a listed process are not hidden processes") {
    SimulatedView v(m, {});
    for (auto f : kAllFamilies) {
      auto cfg = only(f, m);
      cfg.scan_tasks = true;
      auto r = run_family(v, cfg, f);
      REQUIRE(r);
      CHECK_MESSAGE(r->anomalies.empty(), to_string(f));
    }
  }
  SUBCASE("threads of a hidden leader are folded into the leader") {
    SimulatedView v(m, {HideFromListing{Pid{1200}}});
    auto r = scan_sys(v, only(Family::Sys, m));
    REQUIRE(r);
    REQUIRE(r->anomalies.size() == 1);
    CHECK(r->anomalies[0].subject == "1200");
    bool thread_note = false;
    for (const auto& e : r->anomalies[0].evidence) thread_note |= e.observed.find("(thread 1201)") != std::string::npos;
    CHECK(thread_note);
  }
}

TEST_CASE("budget guard") {
  ScanConfig cfg;
  cfg.families = {Family::Brute};
  CHECK(sweep_cost(cfg, 4194304) == (4194304ull - 301 + 1) * 2 * 8);
  cfg.families = {Family::Proc};
  CHECK(sweep_cost(cfg, 4194304) == (4194304ull - 301 + 1) * 2 * 3);
  cfg.families = {Family::Reverse};
  CHECK(sweep_cost(cfg, 4194304) == 0);

  auto m = make_model({}, Pid{5000}, 4194304);
  SimulatedView v(m, {});
  ScanConfig brute;
  brute.families = {Family::Brute};
  auto r = full_scan(v, brute);
  REQUIRE_FALSE(r);
  CHECK(r.error().code == Errc::PidSpaceTooLarge);
  ScanConfig proc_only;
  proc_only.families = {Family::Proc};
  proc_only.min_pid = 4100000;
  CHECK(full_scan(v, proc_only));
}

TEST_CASE("a family that cannot list /proc becomes a partial marker") {
  auto m = small_model();
  NoProcView v(apply_transforms(m, {}));
  auto cfg = sim_config(m);
  cfg.families = {Family::Proc, Family::Sys};
  auto r = full_scan(v, cfg);
  REQUIRE(r);
  REQUIRE(r->partial.size() == 3);
  CHECK(r->partial[0].rfind("listing: ", 0) == 0);
  CHECK(r->partial[1].rfind("proc: ViewUnavailable", 0) == 0);
  CHECK(r->partial[2].rfind("sys: ViewUnavailable", 0) == 0);
}

TEST_CASE("full_scan header and counters") {
  auto m = small_model();
  SimulatedView v(m, {});
  auto r = full_scan(v, sim_config(m));
  REQUIRE(r);
  CHECK(r->anomalies.empty());
  CHECK(r->header.scanner_pid == 5000);
  CHECK(r->header.parent_pid == 1);
  CHECK(r->header.namespaces == kInitNamespaces);
  CHECK(r->header.started == m.clock);
  CHECK(r->counters.pids_listed == 6);
  CHECK(r->counters.probes_issued > 0);
}

TEST_CASE("sweep: parallel chunks merge to the serial result") {
  struct Acc {
    std::vector<std::int64_t> hits;
    std::uint64_t sum = 0;
    void merge(Acc&& o) {
      hits.insert(hits.end(), o.hits.begin(), o.hits.end());
      sum += o.sum;
    }
  };
  auto fn = [](std::int64_t i, Acc& a) {
    if ((i * 2654435761u) % 97 == 3) a.hits.push_back(i);
    a.sum += static_cast<std::uint64_t>(i);
  };
  for (auto [first, last] : std::vector<std::pair<std::int64_t, std::int64_t>>{
           {301, 32768}, {0, 0}, {5, 4}, {1, kSweepChunk}, {1, kSweepChunk + 1}, {301, 100000}}) {
    auto s = sweep_serial<Acc>(first, last, fn);
    for (int w : {1, 2, 3, 8}) {
      auto p = sweep_parallel<Acc>(first, last, w, fn);
      CHECK(p.hits == s.hits);
      CHECK(p.sum == s.sum);
    }
  }
  CHECK(sweep_chunk_count(0) == 0);
  CHECK(sweep_chunk_count(1) == 1);
  CHECK(sweep_chunk_count(kSweepChunk + 1) == 2);
}

TEST_CASE("sweep: exceptions in a worker reach the caller") {
  struct Acc {
    void merge(Acc&&) {}
  };
  auto fn = [](std::int64_t i, Acc&) {
    if (i == 9000) throw std::runtime_error("boom");
  };
  CHECK_THROWS_AS(sweep_parallel<Acc>(0, 20000, 4, fn), std::runtime_error);
}

TEST_CASE("worker count does not change results") {
  auto m = generate_model(77, 300);
  SimulatedView v(m, {HideFromListing{m.processes[100].pid}, GhostEntry{Pid{32000}}});
  auto cfg = sim_config(m);
  auto one = full_scan(v, cfg);
  cfg.worker_count = 8;
  SimulatedView v8(m, {HideFromListing{m.processes[100].pid}, GhostEntry{Pid{32000}}});
  auto eight = full_scan(v8, cfg);
  REQUIRE(one);
  REQUIRE(eight);
  CHECK(one->anomalies == eight->anomalies);
  CHECK(one->counters == eight->counters);
}

TEST_CASE("oracle: listing equals the ground truth and clean scans are silent") {
  std::mt19937_64 rng(12345);
  for (int i = 0; i < 20; ++i) {
    const std::uint64_t seed = rng();
    const std::size_t size = 1 + rng() % 2000;
    auto m = generate_model(seed, size);
    SimulatedView v(m, {});
    auto pids = list_proc_pids(v);
    REQUIRE(pids);
    CHECK(*pids == brute_oracle(m));
    auto r = full_scan(v, sim_config(m));
    REQUIRE(r);
    CHECK_MESSAGE(r->anomalies.empty(), "seed " << seed << " size " << size);
  }
}

TEST_CASE("anomaly merging and ordering") {
  std::vector<Anomaly> into{{AnomalyKind::HiddenFromListing, "42", {{"proc/stat", "alive", "x"}}, Confidence::Suspicious}};
  merge_anomalies(into, {{AnomalyKind::HiddenFromListing, "42", {{"proc/stat", "alive", "x"}, {"sys/kill", "alive", "x"}},
                          Confidence::Confirmed},
                         {AnomalyKind::GhostListing, "7", {}, Confidence::Confirmed}});
  REQUIRE(into.size() == 2);
  CHECK(into[0].evidence.size() == 2);
  CHECK(into[0].confidence == Confidence::Confirmed);
  std::vector<Anomaly> order{{AnomalyKind::GhostListing, "100", {}, Confidence::Confirmed},
                             {AnomalyKind::HiddenFromListing, "20", {}, Confidence::Confirmed},
                             {AnomalyKind::HiddenFromListing, "3", {}, Confidence::Confirmed},
                             {AnomalyKind::HiddenFromListing, "/x", {}, Confidence::Confirmed}};
  sort_anomalies(order);
  CHECK(subjects(order) == std::vector<std::string>{"3", "20", "/x", "100"});
  for (std::size_t i = 0; i < kAnomalyKindCount; ++i) {
    auto k = static_cast<AnomalyKind>(i);
    CHECK(anomaly_kind_from_string(to_string(k)) == k);
  }
}
