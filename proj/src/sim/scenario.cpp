#include "hiddenscan/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "hiddenscan/report.hpp"

namespace hiddenscan {

namespace {

constexpr std::array<std::string_view, kCheckCount> kCheckNames{
    "proc",    "sys",          "brute",       "reverse",        "preload",       "namespaces", "proc-mount",
    "pid-max", "tracer",       "output",      "dirents",        "count",         "integrity",
};

[[noreturn]] void fail(const std::string& what) { throw ScenarioError(what); }

template <class T>
T get(const YAML::Node& n, const std::string& what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail("bad value for " + what);
  }
}

template <class T>
T get_or(const YAML::Node& parent, const char* key, T fallback) {
  const YAML::Node n = parent[key];
  return n ? get<T>(n, key) : fallback;
}

Pid get_pid(const YAML::Node& n, const std::string& what) { return Pid{get<std::int64_t>(n, what)}; }

// "scanner" stands for the scanner's pid, which generated models choose.
Pid scanner_or_pid(const YAML::Node& n, const SystemModel& m, const std::string& what) {
  if (n.IsScalar() && n.as<std::string>() == "scanner") return m.scanner;
  return get_pid(n, what);
}

std::vector<Pid> get_pids(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence()) fail(what + " must be a list");
  std::vector<Pid> out;
  for (const auto& x : n) out.push_back(get_pid(x, what));
  return out;
}

std::vector<std::string> get_strings(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence()) fail(what + " must be a list");
  std::vector<std::string> out;
  for (const auto& x : n) out.push_back(get<std::string>(x, what));
  return out;
}

void check_keys(const YAML::Node& n, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!n.IsMap()) fail(where + " must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail("unknown key '" + key + "' in " + where);
  }
}

ProcessState state_from(const std::string& s) {
  if (s == "running") return ProcessState::Running;
  if (s == "sleeping") return ProcessState::Sleeping;
  if (s == "stopped") return ProcessState::Stopped;
  if (s == "zombie") return ProcessState::Zombie;
  fail("unknown process state " + s);
}

ProcessRecord parse_process(const YAML::Node& n) {
  check_keys(n, {"pid", "ppid", "comm", "cmdline", "state", "uid", "pgid", "sid", "threads", "ns"}, "process");
  if (!n["pid"]) fail("process without pid");
  ProcessRecord r;
  r.pid = get_pid(n["pid"], "pid");
  r.ppid = Pid{get_or<std::int64_t>(n, "ppid", 1)};
  r.comm = get_or<std::string>(n, "comm", "proc" + std::to_string(r.pid.value));
  r.cmdline = n["cmdline"] ? get_strings(n["cmdline"], "cmdline") : std::vector<std::string>{r.comm};
  r.state = state_from(get_or<std::string>(n, "state", "sleeping"));
  r.uid = get_or<std::int64_t>(n, "uid", 0);
  r.pgid = Pid{get_or<std::int64_t>(n, "pgid", r.pid.value)};
  r.sid = Pid{get_or<std::int64_t>(n, "sid", r.pid.value)};
  if (n["threads"]) r.threads = get_pids(n["threads"], "threads");
  if (const auto ns = n["ns"]) {
    check_keys(ns, {"pid", "mnt", "user"}, "ns");
    r.ns.pid_ns = get_or<std::uint64_t>(ns, "pid", r.ns.pid_ns);
    r.ns.mnt_ns = get_or<std::uint64_t>(ns, "mnt", r.ns.mnt_ns);
    r.ns.user_ns = get_or<std::uint64_t>(ns, "user", r.ns.user_ns);
  }
  return r;
}

SystemModel parse_model(const YAML::Node& n) {
  check_keys(n,
             {"pid_max", "generate", "processes", "scanner", "env", "env_extra", "preload_file", "tracers",
              "directories", "stdout", "latency", "transient", "clock", "scanner_maps_extra"},
             "model");
  const std::int64_t pid_max = get_or<std::int64_t>(n, "pid_max", kDefaultPidMax);
  std::vector<ProcessRecord> extra;
  if (n["processes"]) {
    if (!n["processes"].IsSequence()) fail("processes must be a list");
    for (const auto& p : n["processes"]) extra.push_back(parse_process(p));
  }

  SystemModel m;
  try {
    if (const auto g = n["generate"]) {
      check_keys(g, {"seed", "size"}, "generate");
      m = generate_model(get<std::uint64_t>(g["seed"], "seed"), get<std::size_t>(g["size"], "size"), pid_max);
      for (auto& r : extra) {
        if (m.owner_of(r.pid)) fail("process " + std::to_string(r.pid.value) + " clashes with a generated id");
        for (auto t : r.threads) {
          if (m.owner_of(t)) fail("thread " + std::to_string(t.value) + " clashes with a generated id");
        }
        m.processes.push_back(std::move(r));
      }
      if (n["scanner"]) m.scanner = get_pid(n["scanner"], "scanner");
      m.normalize();
    } else {
      m = make_model(std::move(extra), n["scanner"] ? get_pid(n["scanner"], "scanner") : Pid{1000}, pid_max);
    }
  } catch (const InvalidModel& e) {
    fail(std::string("invalid model: ") + e.what());
  }

  if (n["env"]) m.env_of_scanner = get_strings(n["env"], "env");
  if (n["env_extra"]) {
    for (auto& e : get_strings(n["env_extra"], "env_extra")) m.env_of_scanner.push_back(std::move(e));
  }
  if (n["preload_file"]) m.preload_file = get<std::string>(n["preload_file"], "preload_file");
  if (n["scanner_maps_extra"]) {
    std::uint64_t base = 0x7f3a00000000;
    for (auto& path : get_strings(n["scanner_maps_extra"], "scanner_maps_extra")) {
      m.scanner_maps.push_back({path, base, base + 0x2000, "r-xp"});
      base += 0x10000;
    }
  }
  if (const auto t = n["tracers"]) {
    if (!t.IsSequence()) fail("tracers must be a list");
    for (const auto& rel : t) {
      check_keys(rel, {"tracee", "tracer"}, "tracers");
      m.tracers[scanner_or_pid(rel["tracee"], m, "tracee")] = scanner_or_pid(rel["tracer"], m, "tracer");
    }
  }
  if (const auto d = n["directories"]) {
    if (!d.IsMap()) fail("directories must be a mapping");
    std::uint64_t inode = 262144;
    for (const auto& kv : d) {
      const auto path = kv.first.as<std::string>();
      std::vector<DirEntry> entries;
      for (const auto& e : kv.second) {
        DirEntry de;
        if (e.IsScalar()) {
          de.name = e.as<std::string>();
          de.kind = FileKind::Regular;
        } else {
          check_keys(e, {"name", "kind"}, "directory entry");
          de.name = get<std::string>(e["name"], "name");
          auto k = file_kind_from_string(get_or<std::string>(e, "kind", "regular"));
          if (!k) fail("unknown file kind in " + path);
          de.kind = *k;
        }
        de.inode = inode++;
        entries.push_back(std::move(de));
      }
      m.directories[path] = std::move(entries);
    }
  }
  if (const auto s = n["stdout"]) {
    check_keys(s, {"kind", "identity"}, "stdout");
    auto k = descriptor_kind_from_string(get_or<std::string>(s, "kind", "terminal"));
    if (!k) fail("unknown stdout kind");
    m.descriptors.fds[1] = {*k, get_or<std::string>(s, "identity", "/dev/pts/0")};
  }
  if (const auto l = n["latency"]) {
    check_keys(l, {"base_ns", "traced_factor"}, "latency");
    m.latency.base_ns = get_or<std::int64_t>(l, "base_ns", m.latency.base_ns);
    m.latency.traced_factor = get_or<std::int64_t>(l, "traced_factor", m.latency.traced_factor);
  }
  if (n["transient"]) m.transient = get_pids(n["transient"], "transient");
  m.clock = get_or<std::int64_t>(n, "clock", m.clock);
  try {
    m.normalize();
  } catch (const InvalidModel& e) {
    fail(std::string("invalid model: ") + e.what());
  }
  return m;
}

ProbeSet parse_probes(const YAML::Node& n) {
  if (!n) return ProbeSet::all();
  if (n.IsScalar()) {
    const auto s = n.as<std::string>();
    if (s == "all") return ProbeSet::all();
    if (s == "filesystem") return ProbeSet(kFilesystemProbes);
    if (s == "syscall") return ProbeSet(kSyscallProbes);
    fail("unknown probe group " + s);
  }
  ProbeSet out;
  for (const auto& x : get_strings(n, "probes")) {
    auto k = probe_kind_from_string(x);
    if (!k) fail("unknown probe " + x);
    out.insert(*k);
  }
  return out;
}

EvasionTransform parse_transform(const YAML::Node& n, const SystemModel& model) {
  if (!n.IsMap() || !n["type"]) fail("transform without type");
  const auto type = n["type"].as<std::string>();
  if (type == "HideFromListing") {
    check_keys(n, {"type", "pid"}, type);
    return HideFromListing{get_pid(n["pid"], "pid")};
  }
  if (type == "FailProbes") {
    check_keys(n, {"type", "pid", "probes"}, type);
    return FailProbes{get_pid(n["pid"], "pid"), parse_probes(n["probes"])};
  }
  if (type == "VforkClaim") {
    check_keys(n, {"type", "pid"}, type);
    return VforkClaim{get_pid(n["pid"], "pid")};
  }
  if (type == "GhostEntry") {
    check_keys(n, {"type", "pid"}, type);
    return GhostEntry{get_pid(n["pid"], "pid")};
  }
  if (type == "PidMaxTruncated") {
    check_keys(n, {"type", "value"}, type);
    return PidMaxTruncated{get<std::int64_t>(n["value"], "value")};
  }
  if (type == "BindMountProc") {
    check_keys(n, {"type", "hidden", "masquerade"}, type);
    return BindMountProc{get_pid(n["hidden"], "hidden"), get_or<bool>(n, "masquerade", false)};
  }
  if (type == "PidNamespaceSwap") {
    check_keys(n, {"type", "visible"}, type);
    const auto vis = n["visible"];
    if (!vis || !vis.IsSequence()) fail("visible must be a list");
    std::vector<Pid> pids;
    for (const auto& x : vis) {
      pids.push_back(scanner_or_pid(x, model, "visible"));
    }
    return PidNamespaceSwap{std::move(pids)};
  }
  if (type == "EnvStrip") {
    check_keys(n, {"type", "variable"}, type);
    return EnvStrip{get<std::string>(n["variable"], "variable")};
  }
  if (type == "OutputFilter") {
    check_keys(n, {"type", "pattern"}, type);
    return OutputFilter{get<std::string>(n["pattern"], "pattern")};
  }
  if (type == "TamperGetdents") {
    check_keys(n, {"type", "path", "name"}, type);
    return TamperGetdents{get<std::string>(n["path"], "path"), get<std::string>(n["name"], "name")};
  }
  if (type == "FakeTracerPid") {
    check_keys(n, {"type", "value"}, type);
    return FakeTracerPid{get<std::int64_t>(n["value"], "value")};
  }
  fail("unknown transform type " + type);
}

Cell cell_for(const std::vector<const Anomaly*>& hits) {
  if (hits.empty()) return Cell::Blind;
  for (const auto* a : hits) {
    if (a->confidence == Confidence::Confirmed) return Cell::Detects;
  }
  return Cell::SuspiciousOnly;
}

bool has_prefix(const Anomaly& a, std::string_view prefix) {
  return std::any_of(a.evidence.begin(), a.evidence.end(),
                     [&](const Evidence& e) { return e.check.rfind(prefix, 0) == 0; });
}

}  // namespace

std::string_view to_string(Check c) { return kCheckNames[static_cast<std::size_t>(c)]; }

std::optional<Check> check_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kCheckNames.size(); ++i) {
    if (kCheckNames[i] == name) return static_cast<Check>(i);
  }
  return std::nullopt;
}

std::string_view evidence_prefix(Check c) {
  switch (c) {
    case Check::Proc: return "proc/";
    case Check::Sys: return "sys/";
    case Check::Brute: return "brute/";
    case Check::Reverse: return "reverse/";
    case Check::Preload: return "preload/";
    case Check::Namespaces: return "namespaces/";
    case Check::ProcMount: return "proc-mount/";
    case Check::PidMax: return "pid-max/";
    case Check::Tracer: return "tracer/";
    case Check::OutputChannel: return "output/";
    case Check::HiddenDirents: return "dirents/";
    case Check::ProcessCount: return "count/";
    case Check::Integrity: return "integrity/";
  }
  return "";
}

std::string_view to_string(Cell c) {
  switch (c) {
    case Cell::Detects: return "detects";
    case Cell::Blind: return "blind";
    case Cell::SuspiciousOnly: return "suspicious-only";
  }
  return "?";
}

std::optional<Cell> cell_from_string(std::string_view name) {
  if (name == "detects") return Cell::Detects;
  if (name == "blind") return Cell::Blind;
  if (name == "suspicious-only") return Cell::SuspiciousOnly;
  return std::nullopt;
}

std::string_view to_string(Provenance p) { return p == Provenance::Paper ? "paper" : "derived"; }

Scenario parse_scenario(std::string_view yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    fail(std::string("YAML: ") + e.what());
  }
  check_keys(root, {"name", "category", "description", "target", "model", "transforms", "expected", "provenance"},
             "scenario");
  Scenario s;
  if (!root["name"]) fail("scenario without name");
  s.name = get<std::string>(root["name"], "name");
  s.category = get_or<std::string>(root, "category", "single");
  s.description = get_or<std::string>(root, "description", "");
  if (root["target"]) s.target = get_pid(root["target"], "target");
  if (!root["model"]) fail(s.name + ": scenario without model");
  try {
    s.model = parse_model(root["model"]);
    if (const auto t = root["transforms"]) {
      if (!t.IsSequence()) fail("transforms must be a list");
      for (const auto& x : t) s.transforms.push_back(parse_transform(x, s.model));
    }
  } catch (const ScenarioError& e) {
    fail(s.name + ": " + e.what());
  }

  const auto exp = root["expected"];
  if (!exp || !exp.IsMap()) fail(s.name + ": expected must be a mapping");
  std::set<Check> seen;
  for (const auto& kv : exp) {
    const auto key = kv.first.as<std::string>();
    auto c = check_from_string(key);
    if (!c) fail(s.name + ": unknown check " + key);
    auto cell = cell_from_string(get<std::string>(kv.second, key));
    if (!cell) fail(s.name + ": bad cell for " + key);
    at(s.expected, *c) = *cell;
    seen.insert(*c);
  }
  if (seen.size() != kCheckCount) fail(s.name + ": expected must name every check");

  s.provenance.fill(Provenance::Derived);
  if (const auto prov = root["provenance"]) {
    if (!prov.IsMap()) fail(s.name + ": provenance must be a mapping");
    for (const auto& kv : prov) {
      auto c = check_from_string(kv.first.as<std::string>());
      if (!c) fail(s.name + ": unknown check in provenance");
      const auto v = get<std::string>(kv.second, "provenance");
      if (v != "paper" && v != "derived") fail(s.name + ": provenance must be paper or derived");
      s.provenance[static_cast<std::size_t>(*c)] = v == "paper" ? Provenance::Paper : Provenance::Derived;
    }
  }

  try {
    apply_transforms(s.model, s.transforms);
  } catch (const InvalidTransform& e) {
    fail(s.name + ": " + e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const ScenarioError& e) {
    fail(path.filename().string() + ": " + e.what());
  }
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".yaml" || ext == ".yml")) files.push_back(e.path());
  }
  if (ec) fail("cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  std::set<std::string> names;
  for (const auto& f : files) {
    out.push_back(load_scenario(f));
    if (!names.insert(out.back().name).second) fail("duplicate scenario name " + out.back().name);
  }
  return out;
}

ScanConfig scenario_config(const Scenario& s, const ScanConfig& base) {
  ScanConfig cfg = base;
  cfg.budget_override = true;
  cfg.audit.count_tolerance = CountTolerance{0, 0.0};
  cfg.audit.dirent_paths.clear();
  for (const auto& [path, entries] : s.model.directories) cfg.audit.dirent_paths.push_back(path);
  cfg.audit.latency_baseline_ns = s.model.latency.base_ns;
  return cfg;
}

MatrixRow observe(const Scenario& s, const SimulatedView& view, const ScanReport& report,
                  const std::string& delivered_text) {
  MatrixRow row{};
  std::optional<std::string> subject;
  bool target_unreachable = false;
  if (s.target) {
    if (auto local = view.local_pid(*s.target)) subject = pid_subject(*local);
    else target_unreachable = true;
  }
  for (auto c : kAllChecks) {
    if (c == Check::Integrity) {
      at(row, c) = verify_integrity(delivered_text).ok() ? Cell::Blind : Cell::Detects;
      continue;
    }
    const bool family = c == Check::Proc || c == Check::Sys || c == Check::Brute || c == Check::Reverse;
    std::vector<const Anomaly*> hits;
    if (!(family && target_unreachable)) {
      for (const auto& a : report.anomalies) {
        if (!has_prefix(a, evidence_prefix(c))) continue;
        if (family && subject && a.subject != *subject) continue;
        hits.push_back(&a);
      }
    }
    at(row, c) = cell_for(hits);
  }
  return row;
}

ScenarioOutcome run_scenario(const Scenario& s, const ScanConfig& base) {
  ScenarioOutcome out;
  auto view = apply_transforms(s.model, s.transforms);
  auto report = full_scan(*view, scenario_config(s, base));
  if (!report) {
    out.mismatches.push_back(std::string("scan failed: ") + std::string(to_string(report.error().code)) + ": " +
                             report.error().detail);
    return out;
  }
  out.report = std::move(*report);
  out.delivered_text = view->deliver(render_text(out.report));
  out.observed = observe(s, *view, out.report, out.delivered_text);
  for (auto c : kAllChecks) {
    if (at(out.observed, c) == at(s.expected, c)) continue;
    out.mismatches.push_back(std::string(to_string(c)) + ": expected " + std::string(to_string(at(s.expected, c))) +
                             ", observed " + std::string(to_string(at(out.observed, c))));
  }
  out.pass = out.mismatches.empty();
  return out;
}

std::string format_row(const MatrixRow& row) {
  std::string out;
  for (auto c : kAllChecks) {
    if (!out.empty()) out += " ";
    out += std::string(to_string(c)) + "=" + std::string(to_string(at(row, c)));
  }
  return out;
}

}  // namespace hiddenscan
