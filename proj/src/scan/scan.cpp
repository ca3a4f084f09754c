#include "hiddenscan/scan.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "hiddenscan/procfs.hpp"
#include "hiddenscan/sweep.hpp"
#include "hiddenscan/version.hpp"

namespace hiddenscan {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Proc: return "proc";
    case Family::Sys: return "sys";
    case Family::Brute: return "brute";
    case Family::Reverse: return "reverse";
  }
  return "proc";
}

std::optional<Family> family_from_string(std::string_view name) {
  for (auto f : kAllFamilies) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

bool ScanConfig::has(Family f) const { return std::find(families.begin(), families.end(), f) != families.end(); }

std::optional<std::string> ScanConfig::validate() const {
  if (min_pid < 2) return "min_pid must be at least 2";
  if (double_check_rounds < 1) return "double_check_rounds must be at least 1";
  if (worker_count < 1) return "worker_count must be at least 1";
  if ((has(Family::Sys) || has(Family::Brute)) &&
      probe_set.intersect(ProbeSet(kSyscallProbes)).empty()) {
    return "probe set has no syscall probes";
  }
  return std::nullopt;
}

ProbeSummary summarize(Pid pid, std::vector<ProbeOutcome> outcomes) {
  bool alive = false, absent = false, exists = false;
  for (const auto& o : outcomes) {
    alive |= o.verdict == Verdict::Alive;
    absent |= o.verdict == Verdict::Absent;
    exists |= o.proves_existence();
  }
  ProbeSummary s{pid, std::move(outcomes), SummaryVerdict::Absent};
  if (alive && absent) {
    s.verdict = SummaryVerdict::Contradictory;
  } else if (exists) {
    s.verdict = SummaryVerdict::Alive;
  }
  return s;
}

namespace {

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  return __builtin_mul_overflow(a, b, &r) ? UINT64_MAX : r;
}

std::uint64_t per_pid_cost(const ScanConfig& cfg, Family f) {
  switch (f) {
    case Family::Proc: return cfg.probe_set.intersect(ProbeSet(kFilesystemProbes)).size();
    case Family::Sys:
    case Family::Brute: return cfg.probe_set.intersect(ProbeSet(kSyscallProbes)).size();
    case Family::Reverse: return 0;
  }
  return 0;
}

std::string verdict_text(Verdict v) {
  switch (v) {
    case Verdict::Alive: return "alive";
    case Verdict::Absent: return "absent";
    case Verdict::Denied: return "denied";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::string claim_text(PidClaim c) {
  switch (c) {
    case PidClaim::Claimable: return "claimable";
    case PidClaim::InUse: return "in-use";
    case PidClaim::Unsupported: return "unsupported";
  }
  return "unsupported";
}

struct Acc {
  std::vector<Anomaly> found;
  ScanCounters counters;
  void merge(Acc&& o) {
    found.insert(found.end(), std::make_move_iterator(o.found.begin()), std::make_move_iterator(o.found.end()));
    counters.add(o.counters);
  }
};

// Pids listed in one round, as a dense mask.
struct Listing {
  std::vector<Pid> pids;
  std::vector<std::uint8_t> mask;
  bool contains(std::int64_t pid) const {
    return pid >= 0 && pid < static_cast<std::int64_t>(mask.size()) && mask[static_cast<std::size_t>(pid)] != 0;
  }
};

Listing make_listing(std::vector<Pid> pids, std::int64_t pid_max) {
  Listing l;
  std::int64_t top = pid_max;
  for (auto p : pids) top = std::max(top, p.value);
  l.mask.assign(static_cast<std::size_t>(top + 1), 0);
  for (auto p : pids) l.mask[static_cast<std::size_t>(p.value)] = 1;
  l.pids = std::move(pids);
  return l;
}

// Outcomes of one pid's battery. Fixed storage: the sweep calls this for
// every pid in the space.
struct Batch {
  std::array<ProbeOutcome, kProbeKindCount> items;
  std::size_t n = 0;
  const ProbeOutcome* begin() const { return items.data(); }
  const ProbeOutcome* end() const { return items.data() + n; }
  bool any(Verdict v) const {
    return std::any_of(begin(), end(), [v](const ProbeOutcome& o) { return o.verdict == v; });
  }
  bool all_absent() const {
    return n > 0 && std::all_of(begin(), end(), [](const ProbeOutcome& o) { return o.verdict == Verdict::Absent; });
  }
  bool contradictory() const { return any(Verdict::Alive) && any(Verdict::Absent); }
};

Batch run_probes(const SystemView& view, Pid pid, const std::vector<ProbeKind>& kinds, ScanCounters& counters) {
  Batch out;
  for (auto k : kinds) {
    auto r = view.probe_pid(pid, k);
    ++counters.probes_issued;
    out.items[out.n++] = r ? *r : ProbeOutcome::inconclusive(k);
  }
  return out;
}

// Outcomes on an unlisted pid: existence proof -> Confirmed hidden, only
// inconclusive answers -> Suspicious, contradiction -> ContradictoryProbes
// when `contradictions` is set.
std::optional<Anomaly> classify_unlisted(Pid pid, const Batch& outcomes, std::string_view prefix,
                                         bool contradictions) {
  if (outcomes.all_absent() || outcomes.n == 0) return std::nullopt;
  const bool exists = std::any_of(outcomes.begin(), outcomes.end(),
                                  [](const ProbeOutcome& o) { return o.proves_existence(); });
  const bool inconclusive = outcomes.any(Verdict::Inconclusive);
  Anomaly a;
  a.subject = pid_subject(pid);
  if (contradictions && outcomes.contradictory()) {
    a.kind = AnomalyKind::ContradictoryProbes;
    a.confidence = Confidence::Confirmed;
    for (const auto& o : outcomes) {
      a.evidence.push_back({std::string(prefix) + std::string(to_string(o.kind)), verdict_text(o.verdict),
                            "consistent battery"});
    }
    return a;
  }
  if (!exists && !inconclusive) return std::nullopt;
  a.kind = AnomalyKind::HiddenFromListing;
  a.confidence = exists ? Confidence::Confirmed : Confidence::Suspicious;
  for (const auto& o : outcomes) {
    if (o.verdict == Verdict::Absent) continue;
    a.evidence.push_back({std::string(prefix) + std::string(to_string(o.kind)), verdict_text(o.verdict),
                          "absent (not listed)"});
  }
  return a;
}

// A flagged id that is really a thread of a listed process is dropped, unless
// task scanning finds it missing from the leader's task directory. A thread
// of an unlisted leader is reported under the leader.
std::optional<Anomaly> resolve_threads(const SystemView& view, const ScanConfig& cfg, const Listing& listing,
                                       Anomaly a, std::string_view prefix) {
  auto pid = a.subject_pid();
  if (!pid) return a;
  auto status = view.read_proc_file(*pid, "status");
  if (!status) return a;
  auto tgid = procfs::status_int(*status, "Tgid");
  if (!tgid || *tgid == pid->value || *tgid <= 0) return a;

  if (!listing.contains(*tgid)) {
    for (auto& e : a.evidence) e.observed += " (thread " + a.subject + ")";
    a.subject = std::to_string(*tgid);
    return a;
  }
  if (!cfg.scan_tasks) return std::nullopt;
  auto tasks = view.list_dir("/proc/" + std::to_string(*tgid) + "/task");
  if (!tasks) return std::nullopt;
  bool present = std::any_of(tasks->begin(), tasks->end(), [&](const DirEntry& d) { return d.name == a.subject; });
  if (present) return std::nullopt;
  Anomaly t;
  t.kind = AnomalyKind::HiddenFromListing;
  t.subject = a.subject;
  t.confidence = a.confidence;
  t.evidence.push_back({std::string(prefix) + "task-readdir", "missing from /proc/" + std::to_string(*tgid) + "/task",
                        "listed"});
  t.evidence.insert(t.evidence.end(), a.evidence.begin(), a.evidence.end());
  return t;
}

struct Ctx {
  const SystemView& view;
  const ScanConfig& cfg;
  const Listing& listing;
  std::vector<ProbeKind> fs_kinds;
  std::vector<ProbeKind> sys_kinds;
  std::vector<ProbeKind> all_kinds;
};

using PidClassifier = std::optional<Anomaly> (*)(const Ctx&, Pid, ScanCounters&);

std::optional<Anomaly> proc_pid(const Ctx& x, Pid pid, ScanCounters& c) {
  if (x.listing.contains(pid.value)) return std::nullopt;
  ++c.pids_probed;
  return classify_unlisted(pid, run_probes(x.view, pid, x.fs_kinds, c), "proc/", false);
}

std::optional<Anomaly> sys_battery(const Ctx& x, Pid pid, ScanCounters& c, std::string_view prefix) {
  ++c.pids_probed;
  return classify_unlisted(pid, run_probes(x.view, pid, x.sys_kinds, c), prefix, true);
}

std::optional<Anomaly> sys_pid(const Ctx& x, Pid pid, ScanCounters& c) {
  if (x.listing.contains(pid.value)) return std::nullopt;
  return sys_battery(x, pid, c, "sys/");
}

// Claim collisions where the view can answer them, else the syscall battery.
std::optional<Anomaly> brute_pid(const Ctx& x, Pid pid, ScanCounters& c) {
  const bool listed = x.listing.contains(pid.value);
  PidClaim claim = x.view.claim_pid(pid);
  if (claim == PidClaim::Unsupported) {
    if (listed) return std::nullopt;
    return sys_battery(x, pid, c, "brute/");
  }
  ++c.pids_probed;
  ++c.probes_issued;
  if (listed == (claim == PidClaim::InUse)) return std::nullopt;
  Anomaly a;
  a.subject = pid_subject(pid);
  a.confidence = Confidence::Confirmed;
  if (!listed && claim == PidClaim::InUse) {
    a.kind = AnomalyKind::HiddenFromListing;
    a.evidence.push_back({"brute/claim", claim_text(claim), "claimable (not listed)"});
    return a;
  }
  if (listed && claim == PidClaim::Claimable) {
    a.kind = AnomalyKind::ContradictoryProbes;
    a.evidence.push_back({"brute/claim", claim_text(claim), "in-use (listed)"});
    return a;
  }
  return std::nullopt;
}

// A listed pid no probe can see is a fake listing entry.
std::optional<Anomaly> reverse_pid(const Ctx& x, Pid pid, ScanCounters& c) {
  ++c.pids_probed;
  const Batch outcomes = run_probes(x.view, pid, x.all_kinds, c);
  const bool all_absent = outcomes.all_absent();
  if (!all_absent && !outcomes.contradictory()) return std::nullopt;
  Anomaly a;
  a.subject = pid_subject(pid);
  a.confidence = Confidence::Confirmed;
  a.kind = all_absent ? AnomalyKind::GhostListing : AnomalyKind::ContradictoryProbes;
  for (const auto& o : outcomes) {
    a.evidence.push_back({"reverse/" + std::string(to_string(o.kind)), verdict_text(o.verdict),
                          all_absent ? "alive (listed)" : "consistent battery"});
  }
  return a;
}

Result<FamilyResult> run_rounds(const SystemView& view, const ScanConfig& cfg, Family family) {
  if (auto why = cfg.validate()) return make_error(Errc::InvalidArgument, *why);
  const std::int64_t pid_max = view.pid_max().value_or(kDefaultPidMax);
  const std::uint64_t cost = sweep_cost(cfg, pid_max, family);
  if (!cfg.budget_override && cost > cfg.budget) {
    return make_error(Errc::PidSpaceTooLarge,
                      std::string(to_string(family)) + " sweep needs " + std::to_string(cost) + " probes, budget is " +
                          std::to_string(cfg.budget) + "; pass --budget-override");
  }

  PidClassifier classify = nullptr;
  switch (family) {
    case Family::Proc: classify = proc_pid; break;
    case Family::Sys: classify = sys_pid; break;
    case Family::Brute: classify = brute_pid; break;
    case Family::Reverse: classify = reverse_pid; break;
  }
  const std::string prefix = std::string(to_string(family)) + "/";

  FamilyResult result;
  std::map<std::pair<AnomalyKind, std::string>, Anomaly> kept;
  for (int round = 0; round < cfg.double_check_rounds; ++round) {
    auto pids = list_proc_pids(view);
    if (!pids) return pids.error();
    Listing listing = make_listing(*pids, pid_max);
    result.counters.pids_listed = listing.pids.size();

    const Ctx ctx{view,
                  cfg,
                  listing,
                  cfg.probe_set.intersect(ProbeSet(kFilesystemProbes)).kinds(),
                  cfg.probe_set.intersect(ProbeSet(kSyscallProbes)).kinds(),
                  cfg.probe_set.kinds()};
    Acc acc;
    auto fn = [&](std::int64_t i, Acc& a) {
      if (auto found = classify(ctx, Pid{i}, a.counters)) a.found.push_back(std::move(*found));
    };
    if (family == Family::Reverse) {
      std::vector<Pid> targets;
      for (auto p : listing.pids) {
        if (p.value <= pid_max) targets.push_back(p);
      }
      acc = sweep<Acc>(0, static_cast<std::int64_t>(targets.size()) - 1, cfg.worker_count,
                       [&](std::int64_t i, Acc& a) {
                         if (auto found = classify(ctx, targets[static_cast<std::size_t>(i)], a.counters)) {
                           a.found.push_back(std::move(*found));
                         }
                       });
    } else {
      acc = sweep<Acc>(cfg.min_pid, pid_max, cfg.worker_count, fn);
    }
    result.counters.pids_probed += acc.counters.pids_probed;
    result.counters.probes_issued += acc.counters.probes_issued;

    std::vector<Anomaly> round_found;
    for (auto& a : acc.found) {
      if (auto r = resolve_threads(view, cfg, listing, std::move(a), prefix)) round_found.push_back(std::move(*r));
    }
    std::vector<Anomaly> merged;
    merge_anomalies(merged, std::move(round_found));

    std::map<std::pair<AnomalyKind, std::string>, Anomaly> this_round;
    for (auto& a : merged) this_round.emplace(std::make_pair(a.kind, a.subject), std::move(a));
    if (round == 0) {
      kept = std::move(this_round);
      continue;
    }
    for (auto it = kept.begin(); it != kept.end();) {
      auto other = this_round.find(it->first);
      if (other == this_round.end()) {
        it = kept.erase(it);
        continue;
      }
      if (other->second.confidence == Confidence::Suspicious) it->second.confidence = Confidence::Suspicious;
      ++it;
    }
  }
  for (auto& [key, a] : kept) result.anomalies.push_back(std::move(a));
  sort_anomalies(result.anomalies);
  return result;
}

}  // namespace

std::uint64_t sweep_cost(const ScanConfig& cfg, std::int64_t pid_max, Family only) {
  if (!cfg.has(only) || pid_max < cfg.min_pid) return 0;
  const auto span = static_cast<std::uint64_t>(pid_max - cfg.min_pid + 1);
  return sat_mul(sat_mul(span, static_cast<std::uint64_t>(std::max(cfg.double_check_rounds, 0))),
                 per_pid_cost(cfg, only));
}

std::uint64_t sweep_cost(const ScanConfig& cfg, std::int64_t pid_max) {
  std::uint64_t total = 0;
  for (auto f : kAllFamilies) {
    std::uint64_t c = sweep_cost(cfg, pid_max, f);
    total = total > UINT64_MAX - c ? UINT64_MAX : total + c;
  }
  return total;
}

Result<FamilyResult> scan_proc(const SystemView& view, const ScanConfig& cfg) {
  return run_rounds(view, cfg, Family::Proc);
}
Result<FamilyResult> scan_sys(const SystemView& view, const ScanConfig& cfg) {
  return run_rounds(view, cfg, Family::Sys);
}
Result<FamilyResult> scan_brute(const SystemView& view, const ScanConfig& cfg) {
  return run_rounds(view, cfg, Family::Brute);
}
Result<FamilyResult> scan_reverse(const SystemView& view, const ScanConfig& cfg) {
  return run_rounds(view, cfg, Family::Reverse);
}

Result<FamilyResult> run_family(const SystemView& view, const ScanConfig& cfg, Family f) {
  return run_rounds(view, cfg, f);
}

namespace {

ReportHeader make_header(const SystemView& view) {
  ReportHeader h;
  h.tool_version = std::string(kToolName) + " " + kToolVersion;
  h.scanner_pid = view.self_pid().value;
  h.parent_pid = view.parent_pid();
  if (auto ns = view.self_namespaces()) h.namespaces = *ns;
  h.stdout_info = view.descriptors().stdout_info();
  h.started = view.now();
  return h;
}

}  // namespace

Result<ScanReport> full_scan(const SystemView& view, const ScanConfig& cfg) {
  if (auto why = cfg.validate()) return make_error(Errc::InvalidArgument, *why);
  const std::int64_t pid_max = view.pid_max().value_or(kDefaultPidMax);
  const std::uint64_t cost = sweep_cost(cfg, pid_max);
  if (!cfg.budget_override && cost > cfg.budget) {
    return make_error(Errc::PidSpaceTooLarge, "sweep needs " + std::to_string(cost) + " probes over pid_max " +
                                                  std::to_string(pid_max) + ", budget is " +
                                                  std::to_string(cfg.budget) + "; pass --budget-override");
  }

  ScanReport report;
  report.header = make_header(view);
  if (auto pids = list_proc_pids(view)) {
    report.counters.pids_listed = pids->size();
  } else {
    report.partial.push_back("listing: " + pids.error().detail);
  }

  for (auto f : kAllFamilies) {
    if (!cfg.has(f)) continue;
    auto r = run_family(view, cfg, f);
    if (!r) {
      report.partial.push_back(std::string(to_string(f)) + ": " + to_string(r.error().code) + ": " +
                               r.error().detail);
      continue;
    }
    report.counters.pids_probed += r->counters.pids_probed;
    report.counters.probes_issued += r->counters.probes_issued;
    merge_anomalies(report.anomalies, r->anomalies);
  }
  merge_anomalies(report.anomalies, run_audits(view, cfg.audit));
  sort_anomalies(report.anomalies);
  report.header.finished = view.now();
  return report;
}

ScanReport audit_only(const SystemView& view, const ScanConfig& cfg) {
  ScanReport report;
  report.header = make_header(view);
  if (auto pids = list_proc_pids(view)) {
    report.counters.pids_listed = pids->size();
  } else {
    report.partial.push_back("listing: " + pids.error().detail);
  }
  report.anomalies = run_audits(view, cfg.audit);
  sort_anomalies(report.anomalies);
  report.header.finished = view.now();
  return report;
}

}  // namespace hiddenscan
