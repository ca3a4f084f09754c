#include "hiddenscan/simulator.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include "hiddenscan/procfs.hpp"

namespace hiddenscan {

namespace {

constexpr std::uint64_t kSwappedPidNs = 4026534141;
constexpr std::uint64_t kSwappedMntNs = 4026534140;
constexpr std::uint64_t kOverlayMntNs = 4026534200;
constexpr std::uint64_t kProcInodeBase = 1000000;

constexpr std::array<std::string_view, 8> kProcFileNames{
    "status", "stat", "maps", "environ", "cmdline", "ns/pid", "ns/mnt", "ns/user",
};

template <class... F>
struct Overloaded : F... {
  using F::operator()...;
};
template <class... F>
Overloaded(F...) -> Overloaded<F...>;

std::string pid_text(Pid p) { return std::to_string(p.value); }

std::string probe_list(const ProbeSet& s) {
  if (s == ProbeSet::all()) return "all";
  std::string out;
  for (auto k : s.kinds()) {
    if (!out.empty()) out += ",";
    out += std::string(to_string(k));
  }
  return out;
}

std::string state_letter(ProcessState s) {
  switch (s) {
    case ProcessState::Running: return "R (running)";
    case ProcessState::Sleeping: return "S (sleeping)";
    case ProcessState::Stopped: return "T (stopped)";
    case ProcessState::Zombie: return "Z (zombie)";
  }
  return "S (sleeping)";
}

std::string normalize_path(std::string path) {
  while (path.size() > 1 && path.back() == '/') path.pop_back();
  return path;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

std::string transform_name(const EvasionTransform& t) {
  return std::visit(Overloaded{
                        [](const HideFromListing&) { return std::string("HideFromListing"); },
                        [](const FailProbes&) { return std::string("FailProbes"); },
                        [](const VforkClaim&) { return std::string("VforkClaim"); },
                        [](const GhostEntry&) { return std::string("GhostEntry"); },
                        [](const PidMaxTruncated&) { return std::string("PidMaxTruncated"); },
                        [](const BindMountProc&) { return std::string("BindMountProc"); },
                        [](const PidNamespaceSwap&) { return std::string("PidNamespaceSwap"); },
                        [](const EnvStrip&) { return std::string("EnvStrip"); },
                        [](const OutputFilter&) { return std::string("OutputFilter"); },
                        [](const TamperGetdents&) { return std::string("TamperGetdents"); },
                        [](const FakeTracerPid&) { return std::string("FakeTracerPid"); },
                    },
                    t);
}

std::string describe(const EvasionTransform& t) {
  return std::visit(
      Overloaded{
          [](const HideFromListing& x) { return "HideFromListing(" + pid_text(x.pid) + ")"; },
          [](const FailProbes& x) { return "FailProbes(" + pid_text(x.pid) + ", " + probe_list(x.probes) + ")"; },
          [](const VforkClaim& x) { return "VforkClaim(" + pid_text(x.pid) + ")"; },
          [](const GhostEntry& x) { return "GhostEntry(" + pid_text(x.pid) + ")"; },
          [](const PidMaxTruncated& x) { return "PidMaxTruncated(" + std::to_string(x.value) + ")"; },
          [](const BindMountProc& x) {
            return "BindMountProc(" + pid_text(x.hidden) + (x.masquerade ? ", masquerade)" : ")");
          },
          [](const PidNamespaceSwap& x) {
            std::string s = "PidNamespaceSwap(";
            for (std::size_t i = 0; i < x.visible.size(); ++i) s += (i ? "," : "") + pid_text(x.visible[i]);
            return s + ")";
          },
          [](const EnvStrip& x) { return "EnvStrip(" + x.variable + ")"; },
          [](const OutputFilter& x) { return "OutputFilter(" + x.pattern + ")"; },
          [](const TamperGetdents& x) { return "TamperGetdents(" + x.path + ", " + x.name + ")"; },
          [](const FakeTracerPid& x) { return "FakeTracerPid(" + std::to_string(x.value) + ")"; },
      },
      t);
}

SimulatedView::SimulatedView(SystemModel model, std::vector<EvasionTransform> transforms)
    : model_(std::move(model)), transforms_(std::move(transforms)) {
  try {
    model_.normalize();
  } catch (const InvalidModel& e) {
    throw InvalidTransform(std::string("model invariant: ") + e.what());
  }
  compile();
}

void SimulatedView::compile() {
  for (const auto& r : model_.processes) {
    PidState st;
    st.listed = st.fs_visible = st.alive = true;
    st.record = &r;
    st.model_pid = r.pid.value;
    pids_[r.pid.value] = st;
    for (auto t : r.threads) {
      PidState ts;
      ts.fs_visible = ts.alive = true;
      ts.record = &r;
      ts.model_pid = t.value;
      pids_[t.value] = ts;
    }
  }
  for (auto t : model_.transient) transient_.push_back(t.value);
  pid_max_view_ = pid_max_true_ = model_.pid_max;
  const ProcessRecord* scanner = model_.find(model_.scanner);
  self_ns_ = scanner->ns;
  self_local_ = scanner->pid.value;
  parent_local_ = scanner->ppid.value;
  env_ = model_.env_of_scanner;
  mounts_ = model_.mounts;

  auto local_process = [&](Pid model_pid, const std::string& what) -> PidState& {
    auto local = local_pid(model_pid);
    if (!local) throw InvalidTransform(what + ": pid " + pid_text(model_pid) + " is outside the scanner's namespace");
    auto it = pids_.find(local->value);
    if (it == pids_.end() || !it->second.alive || !model_.find(model_pid)) {
      throw InvalidTransform(what + ": pid " + pid_text(model_pid) + " is not a process in the model");
    }
    return it->second;
  };

  for (const auto& t : transforms_) {
    const std::string what = describe(t);
    std::visit(
        Overloaded{
            [&](const HideFromListing& x) { local_process(x.pid, what).listed = false; },
            [&](const FailProbes& x) {
              if (x.probes.empty()) throw InvalidTransform(what + ": empty probe set");
              local_process(x.pid, what).fail_mask |= x.probes.bits();
            },
            [&](const VforkClaim& x) { local_process(x.pid, what).claim_override = PidClaim::Claimable; },
            [&](const GhostEntry& x) {
              if (x.pid.value < 1) throw InvalidTransform(what + ": pid must be positive");
              if (model_.owner_of(x.pid) || pids_.count(x.pid.value)) {
                throw InvalidTransform(what + ": pid " + pid_text(x.pid) + " exists in the model");
              }
              PidState st;
              st.listed = true;
              st.model_pid = x.pid.value;
              pids_[x.pid.value] = st;
            },
            [&](const PidMaxTruncated& x) {
              if (x.value < 1) throw InvalidTransform(what + ": value must be positive");
              pid_max_view_ = x.value;
            },
            [&](const BindMountProc& x) {
              PidState& st = local_process(x.hidden, what);
              overlay_ = Overlay{local_pid(x.hidden)->value, x.masquerade};
              (void)st;
              MountEntry m;
              m.mount_point = "/proc";
              m.fs_type = x.masquerade ? "proc" : "tmpfs";
              m.source = x.masquerade ? "proc" : "tmpfs";
              m.root = x.masquerade ? "/" : "/ununhide7Qm2xA";
              m.fs_magic = x.masquerade ? kProcSuperMagic : kTmpfsMagic;
              m.flags = x.masquerade ? 0 : (kMountBind | kMountPrivate);
              mounts_.push_back(m);
              self_ns_.mnt_ns = kOverlayMntNs;
            },
            [&](const PidNamespaceSwap& x) {
              if (pid_ns_swapped_) throw InvalidTransform(what + ": namespace already swapped");
              if (overlay_) throw InvalidTransform(what + ": cannot follow BindMountProc");
              std::vector<Pid> visible = x.visible;
              std::sort(visible.begin(), visible.end());
              visible.erase(std::unique(visible.begin(), visible.end()), visible.end());
              if (std::find(visible.begin(), visible.end(), model_.scanner) == visible.end()) {
                throw InvalidTransform(what + ": visible set must contain the scanner");
              }
              std::vector<Pid> order{model_.scanner};
              for (auto p : visible) {
                if (p != model_.scanner) order.push_back(p);
              }
              std::unordered_map<std::int64_t, PidState> next;
              std::int64_t local = 0;
              for (auto p : order) {
                if (!model_.find(p)) throw InvalidTransform(what + ": pid " + pid_text(p) + " is not a process");
                auto old = pids_.find(p.value);
                PidState st = old != pids_.end() ? old->second : PidState{};
                next[++local] = st;
                to_local_[p.value] = local;
              }
              for (auto p : order) {
                for (auto t : model_.find(p)->threads) {
                  PidState st = pids_.at(t.value);
                  next[++local] = st;
                  to_local_[t.value] = local;
                }
              }
              pids_ = std::move(next);
              transient_.clear();
              pid_ns_swapped_ = true;
              self_local_ = 1;
              parent_local_ = 0;
              self_ns_.pid_ns = kSwappedPidNs;
              self_ns_.mnt_ns = kSwappedMntNs;
            },
            [&](const EnvStrip& x) {
              if (x.variable.empty()) throw InvalidTransform(what + ": empty variable name");
              const std::string prefix = x.variable + "=";
              for (auto& e : env_) {
                if (e.rfind(prefix, 0) == 0) e[0] = 'x';
              }
            },
            [&](const OutputFilter& x) {
              try {
                std::regex re(x.pattern);
              } catch (const std::regex_error& e) {
                throw InvalidTransform(what + ": bad pattern: " + e.what());
              }
              output_filters_.push_back(x.pattern);
            },
            [&](const TamperGetdents& x) {
              const std::string path = normalize_path(x.path);
              if (path != "/proc" && !model_.directories.count(path)) {
                throw InvalidTransform(what + ": no directory " + path + " in the model");
              }
              if (x.name.empty() || x.name.find('/') != std::string::npos) {
                throw InvalidTransform(what + ": bad entry name");
              }
              hidden_names_.emplace_back(path, x.name);
            },
            [&](const FakeTracerPid& x) {
              if (x.value < 0) throw InvalidTransform(what + ": value must not be negative");
              fake_tracer_ = x.value;
            },
        },
        t);
  }

  std::int64_t top = std::max(pid_max_true_, pid_max_view_);
  for (const auto& [local, st] : pids_) {
    top = std::max(top, local);
    if (st.listed) listed_.push_back(local);
  }
  for (auto t : transient_) top = std::max(top, t);
  std::sort(listed_.begin(), listed_.end());
  known_.assign(static_cast<std::size_t>(top + 1), 0);
  for (const auto& [local, st] : pids_) known_[static_cast<std::size_t>(local)] = 1;
}

const SimulatedView::PidState* SimulatedView::state_of(std::int64_t local) const {
  if (local < 0 || local >= static_cast<std::int64_t>(known_.size()) || !known_[static_cast<std::size_t>(local)]) {
    return nullptr;
  }
  auto it = pids_.find(local);
  return it == pids_.end() ? nullptr : &it->second;
}

std::optional<Pid> SimulatedView::local_pid(Pid model_pid) const {
  if (!pid_ns_swapped_) return model_pid;
  auto it = to_local_.find(model_pid.value);
  if (it == to_local_.end()) return std::nullopt;
  return Pid{it->second};
}

bool SimulatedView::scanner_traced() const { return model_.tracers.count(model_.scanner) != 0; }

// Whether /proc/<local> resolves for path-based access.
bool SimulatedView::proc_entry_visible(std::int64_t local, const PidState& st) const {
  if (!st.alive) return false;
  if (overlay_) return st.listed && local != overlay_->hidden;
  return st.fs_visible;
}

bool SimulatedView::name_hidden(const std::string& dir, const std::string& name) const {
  return std::any_of(hidden_names_.begin(), hidden_names_.end(),
                     [&](const auto& h) { return h.first == dir && h.second == name; });
}

std::vector<DirEntry> SimulatedView::proc_entries(bool first_enumeration) const {
  const FileKind pid_kind = overlay_ ? FileKind::Symlink : FileKind::Directory;
  std::vector<DirEntry> out{{".", 1, FileKind::Directory}, {"..", 2, FileKind::Directory}};
  const std::vector<std::pair<std::string, FileKind>> fixed{
      {"self", FileKind::Symlink},         {"thread-self", FileKind::Symlink},
      {"mounts", FileKind::Symlink},       {"sys", FileKind::Directory},
      {"meminfo", overlay_ ? FileKind::Symlink : FileKind::Regular},
      {"uptime", overlay_ ? FileKind::Symlink : FileKind::Regular},
  };
  std::uint64_t ino = 3;
  for (const auto& [name, kind] : fixed) out.push_back({name, ino++, kind});
  std::vector<std::int64_t> pids = listed_;
  if (first_enumeration && !overlay_) {
    pids.insert(pids.end(), transient_.begin(), transient_.end());
    std::sort(pids.begin(), pids.end());
  }
  for (auto p : pids) {
    if (overlay_ && p == overlay_->hidden) continue;
    out.push_back({std::to_string(p), kProcInodeBase + static_cast<std::uint64_t>(p), pid_kind});
  }
  std::erase_if(out, [&](const DirEntry& e) { return name_hidden("/proc", e.name); });
  return out;
}

Result<std::vector<DirEntry>> SimulatedView::list_dir(const std::string& raw_path) const {
  const std::string path = normalize_path(raw_path);
  if (path == "/proc") {
    const bool first = proc_enumerations_.fetch_add(1, std::memory_order_relaxed) == 0;
    return proc_entries(first);
  }
  if (path.rfind("/proc/", 0) == 0) {
    std::string_view rest = std::string_view(path).substr(6);
    auto slash = rest.find('/');
    auto local = parse_pid_name(rest.substr(0, slash));
    const PidState* st = local ? state_of(*local) : nullptr;
    if (!st || !proc_entry_visible(*local, *st)) return make_error(Errc::NotFound, path);
    std::string_view sub = slash == std::string_view::npos ? std::string_view() : rest.substr(slash + 1);
    std::vector<DirEntry> out{{".", 1, FileKind::Directory}, {"..", 2, FileKind::Directory}};
    if (sub.empty()) {
      for (const char* n : {"status", "stat", "cmdline", "environ", "maps"}) out.push_back({n, 0, FileKind::Regular});
      out.push_back({"ns", 0, FileKind::Directory});
      out.push_back({"task", 0, FileKind::Directory});
      return out;
    }
    if (sub == "task") {
      const ProcessRecord& r = *st->record;
      auto leader = local_pid(r.pid);
      if (leader) out.push_back({std::to_string(leader->value), 0, FileKind::Directory});
      for (auto t : r.threads) {
        if (auto lt = local_pid(t)) out.push_back({std::to_string(lt->value), 0, FileKind::Directory});
      }
      return out;
    }
    if (sub == "ns") {
      for (const char* n : {"pid", "mnt", "user"}) out.push_back({n, 0, FileKind::Symlink});
      return out;
    }
    return make_error(Errc::NotFound, path);
  }
  auto it = model_.directories.find(path);
  if (it == model_.directories.end()) {
    if (auto st = stat_path(path); st && st->kind != FileKind::Directory) return make_error(Errc::NotADirectory, path);
    return make_error(Errc::NotFound, path);
  }
  std::vector<DirEntry> out{{".", 1, FileKind::Directory}, {"..", 2, FileKind::Directory}};
  for (const auto& e : it->second) {
    if (!name_hidden(path, e.name)) out.push_back(e);
  }
  return out;
}

Result<ProbeOutcome> SimulatedView::probe_pid(Pid pid, ProbeKind kind) const {
  const PidState* st = state_of(pid.value);
  if (!st || !st->alive) return ProbeOutcome::absent(kind);
  if ((st->fail_mask & (1u << static_cast<unsigned>(kind))) != 0) return ProbeOutcome::absent(kind);
  const bool path_based = kind == ProbeKind::Stat || kind == ProbeKind::Chdir || kind == ProbeKind::Opendir;
  if (path_based && !proc_entry_visible(pid.value, *st)) return ProbeOutcome::absent(kind);
  return ProbeOutcome::alive(kind);
}

Result<std::string> SimulatedView::render_proc_file(const PidState& st, std::int64_t local,
                                                    std::string_view name) const {
  const ProcessRecord& r = *st.record;
  const bool is_scanner = r.pid == model_.scanner && st.model_pid == r.pid.value;
  const std::int64_t tgid = local_pid(r.pid).value_or(Pid{0}).value;
  auto local_or_zero = [&](Pid p) -> std::int64_t {
    if (p.value == 0) return 0;
    if (!pid_ns_swapped_) return p.value;
    return local_pid(p).value_or(Pid{0}).value;
  };

  NamespaceIds ns = r.ns;
  if (pid_ns_swapped_) {
    ns.pid_ns = self_ns_.pid_ns;
    ns.mnt_ns = self_ns_.mnt_ns;
  }
  if (r.pid == model_.scanner) ns = self_ns_;

  if (name == "status") {
    std::int64_t tracer = 0;
    if (auto it = model_.tracers.find(r.pid); it != model_.tracers.end()) tracer = local_or_zero(it->second);
    if (r.pid == model_.scanner && fake_tracer_) tracer = *fake_tracer_;
    const std::int64_t ppid = r.pid == model_.scanner ? parent_local_ : local_or_zero(r.ppid);
    std::ostringstream os;
    os << "Name:\t" << r.comm << "\nUmask:\t0022\nState:\t" << state_letter(r.state) << "\nTgid:\t" << tgid
       << "\nNgid:\t0\nPid:\t" << local << "\nPPid:\t" << ppid << "\nTracerPid:\t" << tracer << "\nUid:\t" << r.uid
       << "\t" << r.uid << "\t" << r.uid << "\t" << r.uid << "\nGid:\t" << r.uid << "\t" << r.uid << "\t" << r.uid
       << "\t" << r.uid << "\nThreads:\t" << (1 + r.threads.size()) << "\n";
    return os.str();
  }
  if (name == "stat") {
    const char state = state_letter(r.state)[0];
    std::ostringstream os;
    os << local << " (" << r.comm << ") " << state << " " << local_or_zero(r.ppid) << " " << local_or_zero(r.pgid)
       << " " << local_or_zero(r.sid) << " 0 -1 4194560 0 0 0 0 0 0 0 0 20 0 " << (1 + r.threads.size())
       << " 0 100 0 0\n";
    return os.str();
  }
  if (name == "cmdline") return procfs::join_nul(r.cmdline);
  if (name == "environ") return is_scanner ? procfs::join_nul(env_) : std::string();
  if (name == "maps") {
    std::ostringstream os;
    const std::vector<MappedObject> fallback{{"[vdso]", 0x7ffd00000000, 0x7ffd00002000, "r-xp"}};
    for (const auto& m : r.pid == model_.scanner ? model_.scanner_maps : fallback) {
      os << hex(m.start) << "-" << hex(m.end) << " " << m.perms << " 00000000 00:00 0";
      if (m.path != "[anonymous]") os << "                          " << m.path;
      os << "\n";
    }
    return os.str();
  }
  if (name == "ns/pid") return format_ns_link("pid", ns.pid_ns);
  if (name == "ns/mnt") return format_ns_link("mnt", ns.mnt_ns);
  if (name == "ns/user") return format_ns_link("user", ns.user_ns);
  return make_error(Errc::InvalidArgument, std::string(name));
}

Result<std::string> SimulatedView::read_proc_file(Pid pid, std::string_view name) const {
  if (std::find(kProcFileNames.begin(), kProcFileNames.end(), name) == kProcFileNames.end()) {
    return make_error(Errc::InvalidArgument, "unsupported proc file " + std::string(name));
  }
  const PidState* st = state_of(pid.value);
  if (!st || !proc_entry_visible(pid.value, *st) || !st->record) {
    return make_error(Errc::NotFound, "/proc/" + pid_text(pid) + "/" + std::string(name));
  }
  return render_proc_file(*st, pid.value, name);
}

Result<std::string> SimulatedView::read_file(const std::string& raw_path) const {
  const std::string path = normalize_path(raw_path);
  if (path == "/proc/sys/kernel/pid_max") return std::to_string(pid_max_view_) + "\n";
  if (path == "/etc/ld.so.preload" && model_.preload_file) return *model_.preload_file;
  return make_error(Errc::NotFound, path);
}

Result<PathStat> SimulatedView::stat_path(const std::string& raw_path) const {
  const std::string path = normalize_path(raw_path);
  if (path == "/proc") {
    std::uint64_t magic = kProcSuperMagic;
    if (overlay_ && !overlay_->masquerade) magic = kTmpfsMagic;
    return PathStat{FileKind::Directory, 2, 1, magic};
  }
  if (path.rfind("/proc/", 0) == 0) {
    std::string_view rest = std::string_view(path).substr(6);
    if (rest == "sys/kernel/pid_max") return PathStat{FileKind::Regular, 1, 4, kProcSuperMagic};
    auto slash = rest.find('/');
    auto local = parse_pid_name(rest.substr(0, slash));
    const PidState* st = local ? state_of(*local) : nullptr;
    if (!st || !proc_entry_visible(*local, *st)) return make_error(Errc::NotFound, path);
    const bool link = overlay_ && slash == std::string_view::npos;
    return PathStat{link ? FileKind::Symlink : FileKind::Directory, link ? 1u : 9u,
                    kProcInodeBase + static_cast<std::uint64_t>(*local), kProcSuperMagic};
  }

  auto nlink_of = [&](const std::string& dir) -> std::uint64_t {
    auto it = model_.directories.find(dir);
    if (it == model_.directories.end()) return 2;
    std::uint64_t n = 2;
    for (const auto& e : it->second) n += e.kind == FileKind::Directory ? 1 : 0;
    return n;
  };
  if (model_.directories.count(path)) {
    std::uint64_t inode = 2;
    auto slash = path.rfind('/');
    const std::string parent = slash == 0 ? "/" : path.substr(0, slash);
    if (auto p = model_.directories.find(parent); p != model_.directories.end()) {
      for (const auto& e : p->second) {
        if (e.name == path.substr(slash + 1)) inode = e.inode;
      }
    }
    return PathStat{FileKind::Directory, nlink_of(path), inode, 0xef53};
  }
  auto slash = path.rfind('/');
  if (slash == std::string::npos) return make_error(Errc::NotFound, path);
  const std::string parent = slash == 0 ? "/" : path.substr(0, slash);
  const std::string leaf = path.substr(slash + 1);
  if (auto p = model_.directories.find(parent); p != model_.directories.end()) {
    for (const auto& e : p->second) {
      if (e.name != leaf) continue;
      return PathStat{e.kind, e.kind == FileKind::Directory ? nlink_of(path) : 1, e.inode, 0xef53};
    }
  }
  return make_error(Errc::NotFound, path);
}

Result<std::vector<MountEntry>> SimulatedView::mounts() const { return mounts_; }

Result<NamespaceIds> SimulatedView::self_namespaces() const { return self_ns_; }

Result<std::int64_t> SimulatedView::pid_max() const { return pid_max_view_; }

Result<std::int64_t> SimulatedView::pid_max_reread() const { return pid_max_view_; }

Result<std::int64_t> SimulatedView::process_count_estimate() const { return model_.task_count(); }

PidClaim SimulatedView::claim_pid(Pid pid) const {
  if (pid.value < 1 || pid.value > pid_max_true_) return PidClaim::Unsupported;
  const PidState* st = state_of(pid.value);
  if (!st || !st->alive) return PidClaim::Claimable;
  return st->claim_override.value_or(PidClaim::InUse);
}

Pid SimulatedView::self_pid() const { return Pid{self_local_}; }

std::int64_t SimulatedView::parent_pid() const { return parent_local_; }

std::vector<std::string> SimulatedView::scanner_environment() const { return env_; }

std::string SimulatedView::self_executable() const { return model_.scanner_exe; }

SelfTraceResult SimulatedView::attempt_self_trace() const {
  if (fake_tracer_ && *fake_tracer_ == 0) return {SelfTraceStatus::Untraced, 0};
  if (scanner_traced()) return {SelfTraceStatus::Refused, 1};
  return {SelfTraceStatus::Untraced, 0};
}

std::vector<std::int64_t> SimulatedView::sample_syscall_latency(int samples) const {
  const std::int64_t per_call =
      model_.latency.base_ns * (scanner_traced() ? std::max<std::int64_t>(model_.latency.traced_factor, 1) : 1);
  return std::vector<std::int64_t>(static_cast<std::size_t>(std::max(samples, 0)), per_call);
}

DescriptorState SimulatedView::descriptors() const { return model_.descriptors; }

std::int64_t SimulatedView::now() const { return model_.clock; }

std::string SimulatedView::deliver(const std::string& report_text) const {
  return apply_output_filters(report_text, transforms_);
}

std::shared_ptr<SimulatedView> apply_transforms(const SystemModel& model,
                                                const std::vector<EvasionTransform>& transforms) {
  return std::make_shared<SimulatedView>(model, transforms);
}

std::string apply_output_filters(const std::string& text, const std::vector<EvasionTransform>& transforms) {
  std::vector<std::regex> filters;
  for (const auto& t : transforms) {
    if (const auto* f = std::get_if<OutputFilter>(&t)) filters.emplace_back(f->pattern);
  }
  if (filters.empty()) return text;
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? text.size() : nl + 1;
    const std::string line = text.substr(pos, (nl == std::string::npos ? text.size() : nl) - pos);
    const bool drop = std::any_of(filters.begin(), filters.end(),
                                  [&](const std::regex& re) { return std::regex_search(line, re); });
    if (!drop) out.append(text, pos, end - pos);
    pos = end;
  }
  return out;
}

}  // namespace hiddenscan
