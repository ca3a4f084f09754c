#include "hiddenscan/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

#include "hiddenscan/procfs.hpp"

namespace hiddenscan {

namespace {

Anomaly finding(AnomalyKind kind, std::string subject, Confidence c, std::string check, std::string observed,
                std::string expected) {
  Anomaly a;
  a.kind = kind;
  a.subject = std::move(subject);
  a.confidence = c;
  a.evidence.push_back({std::move(check), std::move(observed), std::move(expected)});
  return a;
}

std::string basename_of(const std::string& path) {
  auto slash = path.rfind('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

std::string strip_deleted(std::string path) {
  constexpr std::string_view kSuffix = " (deleted)";
  if (path.size() > kSuffix.size() && path.compare(path.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0) {
    path.resize(path.size() - kSuffix.size());
  }
  return path;
}

bool is_loader(const std::string& path) {
  std::string base = basename_of(path);
  return base.rfind("ld-linux", 0) == 0 || base.rfind("ld-", 0) == 0 || base == "ld.so";
}

bool allowed_mapping(const std::string& path, const std::string& self_exe, const std::vector<std::string>& extra) {
  static const std::set<std::string> kKernelPages{"[vdso]", "[vsyscall]", "[vvar]", "[vvar_vclock]", "[uprobes]"};
  if (kKernelPages.count(path)) return true;
  const std::string clean = strip_deleted(path);
  if (!self_exe.empty() && clean == strip_deleted(self_exe)) return true;
  if (is_loader(clean)) return true;
  for (const auto& a : extra) {
    if (a.empty()) continue;
    if (a.back() == '/' ? clean.rfind(a, 0) == 0 : clean == a) return true;
  }
  return false;
}

std::string first_line(const std::string& text) {
  auto nl = text.find('\n');
  std::string line = text.substr(0, nl);
  if (nl != std::string::npos && nl + 1 < text.size()) line += " ...";
  return line;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

std::string ns_text(const NamespaceIds& ns) {
  return format_ns_link("pid", ns.pid_ns) + " " + format_ns_link("mnt", ns.mnt_ns) + " " +
         format_ns_link("user", ns.user_ns);
}

}  // namespace

std::int64_t CountTolerance::allowed(std::int64_t estimate) const {
  return absolute + static_cast<std::int64_t>(std::ceil(relative * static_cast<double>(std::max<std::int64_t>(estimate, 0))));
}

std::int64_t median_ns(std::vector<std::int64_t> samples) {
  if (samples.empty()) return 0;
  auto mid = samples.begin() + static_cast<std::ptrdiff_t>((samples.size() - 1) / 2);
  std::nth_element(samples.begin(), mid, samples.end());
  return *mid;
}

Result<std::int64_t> listed_task_count(const SystemView& view) {
  auto pids = list_proc_pids(view);
  if (!pids) return pids.error();
  std::int64_t total = 0;
  for (auto p : *pids) {
    std::int64_t threads = 1;
    if (auto status = view.read_proc_file(p, "status")) {
      if (auto t = procfs::status_int(*status, "Threads"); t && *t > 0) threads = *t;
    }
    total += threads;
  }
  return total;
}

std::vector<Anomaly> audit_preload(const SystemView& view, const AuditConfig& cfg) {
  std::vector<Anomaly> out;

  for (const auto& entry : view.scanner_environment()) {
    auto eq = entry.find('=');
    std::string name = entry.substr(0, eq);
    std::string value = eq == std::string::npos ? std::string() : entry.substr(eq + 1);
    for (const auto& var : cfg.preload_variables) {
      if (name == var) {
        if (!value.empty()) {
          out.push_back(finding(AnomalyKind::PreloadEnvActive, name, Confidence::Confirmed, "preload/environ", entry,
                                "unset"));
        }
      } else if (name.size() == var.size() && !name.empty() && name.compare(1, std::string::npos, var, 1) == 0) {
        out.push_back(finding(AnomalyKind::PreloadEnvActive, name, Confidence::Suspicious, "preload/env-rename", entry,
                              "no renamed " + var));
      }
    }
  }

  auto file = view.read_file(cfg.preload_file);
  if (file) {
    if (!blank(*file)) {
      out.push_back(finding(AnomalyKind::PreloadFileActive, cfg.preload_file, Confidence::Confirmed,
                            "preload/file", first_line(*file), "absent or empty"));
    }
  } else if (file.error().code != Errc::NotFound) {
    out.push_back(finding(AnomalyKind::PreloadFileActive, cfg.preload_file, Confidence::Suspicious, "preload/file",
                          std::string("unreadable: ") + to_string(file.error().code), "absent or empty"));
  }

  auto maps = view.read_proc_file(view.self_pid(), "maps");
  if (!maps) {
    out.push_back(finding(AnomalyKind::UnexpectedMappedObject, "maps", Confidence::Suspicious, "preload/maps",
                          std::string("unreadable: ") + to_string(maps.error().code), "readable"));
    return out;
  }
  const std::string self_exe = view.self_executable();
  std::set<std::string> seen;
  for (const auto& m : procfs::parse_maps(*maps)) {
    if (!m.executable() || allowed_mapping(m.path, self_exe, cfg.allowlist)) continue;
    if (!seen.insert(m.path).second) continue;
    const bool anonymous = m.path.empty() || m.path[0] != '/';
    out.push_back(finding(AnomalyKind::UnexpectedMappedObject, m.path,
                          anonymous ? Confidence::Suspicious : Confidence::Confirmed, "preload/maps",
                          m.perms + " " + m.path, "main executable, loader or kernel pages"));
  }
  return out;
}

std::vector<Anomaly> audit_namespaces(const SystemView& view, const AuditConfig& cfg) {
  std::vector<Anomaly> out;
  auto self = view.self_namespaces();
  auto init = read_namespaces(view, Pid{1});
  if (!self || !init) {
    const Error& e = !self ? self.error() : init.error();
    out.push_back(finding(AnomalyKind::NamespaceMismatch, "namespaces", Confidence::Suspicious,
                          !self ? "namespaces/self-links" : "namespaces/init-links",
                          std::string("unreadable: ") + to_string(e.code) + " " + e.detail, "readable ns links"));
  } else {
    if (self->pid_ns != init->pid_ns) {
      out.push_back(finding(AnomalyKind::NamespaceMismatch, "pid-namespace", Confidence::Confirmed, "namespaces/pid",
                            format_ns_link("pid", self->pid_ns),
                            format_ns_link("pid", init->pid_ns) + " (pid 1)"));
    }
    if (self->mnt_ns != init->mnt_ns) {
      out.push_back(finding(AnomalyKind::NamespaceMismatch, "mnt-namespace", Confidence::Suspicious, "namespaces/mnt",
                            format_ns_link("mnt", self->mnt_ns),
                            format_ns_link("mnt", init->mnt_ns) + " (pid 1)"));
    }
    if (self->user_ns != init->user_ns) {
      out.push_back(finding(AnomalyKind::NamespaceMismatch, "user-namespace", Confidence::Suspicious,
                            "namespaces/user", format_ns_link("user", self->user_ns),
                            format_ns_link("user", init->user_ns) + " (pid 1)"));
    }
  }

  auto estimate = view.process_count_estimate();
  auto listed = listed_task_count(view);
  auto pids = list_proc_pids(view);
  const std::int64_t self_pid = view.self_pid().value;
  const std::int64_t listed_n = pids ? static_cast<std::int64_t>(pids->size()) : 0;

  if (self_pid <= 2 && ((estimate && *estimate > 2) || listed_n > 2)) {
    Anomaly a = finding(AnomalyKind::NamespaceMismatch, "pid-namespace", Confidence::Confirmed,
                        "namespaces/self-pid", std::to_string(self_pid), "> 2 on a populated system");
    a.evidence.push_back({"namespaces/parent-pid", std::to_string(view.parent_pid()), "> 0"});
    if (self) a.evidence.push_back({"namespaces/self-links", ns_text(*self), "init namespaces"});
    out.push_back(std::move(a));
  }

  if (estimate && listed) {
    const std::int64_t diff = *estimate - *listed;
    if (*listed * 2 < *estimate && diff > cfg.count_tolerance.allowed(*estimate)) {
      const std::string observed = std::to_string(*listed) + " listed tasks";
      const std::string expected = std::to_string(*estimate) + " kernel tasks";
      out.push_back(finding(AnomalyKind::NamespaceMismatch, "pid-namespace", Confidence::Confirmed,
                            "namespaces/listing-vs-estimate", observed, expected));
      out.push_back(finding(AnomalyKind::ProcessCountMismatch, "process-count", Confidence::Confirmed,
                            "namespaces/listing-vs-estimate", observed, expected));
    }
  }

  std::vector<Anomaly> merged;
  merge_anomalies(merged, std::move(out));
  return merged;
}

std::vector<Anomaly> audit_proc_mount(const SystemView& view) {
  const std::string subject = "/proc";
  auto mounts = view.mounts();
  if (!mounts) {
    return {finding(AnomalyKind::ProcMountSuspicious, subject, Confidence::Suspicious, "proc-mount/mountinfo",
                    std::string("unreadable: ") + to_string(mounts.error().code), "readable")};
  }
  const MountEntry* proc = nullptr;
  for (const auto& m : *mounts) {
    if (m.mount_point == "/proc") proc = &m;
  }
  if (!proc) {
    return {finding(AnomalyKind::ProcMountSuspicious, subject, Confidence::Suspicious, "proc-mount/mountinfo",
                    "no /proc mount", "proc mounted on /proc")};
  }

  Anomaly a;
  a.kind = AnomalyKind::ProcMountSuspicious;
  a.subject = subject;
  a.confidence = Confidence::Confirmed;
  auto hex = [](std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return std::string(buf);
  };
  if (proc->fs_type != "proc") a.evidence.push_back({"proc-mount/fs-type", proc->fs_type, "proc"});
  if (proc->fs_magic != kProcSuperMagic) {
    a.evidence.push_back({"proc-mount/mount-magic", hex(proc->fs_magic), hex(kProcSuperMagic)});
  }
  if (proc->has(kMountBind)) a.evidence.push_back({"proc-mount/bind", "root=" + proc->root, "root=/"});
  if (auto st = view.stat_path("/proc"); st && st->fs_magic != kProcSuperMagic) {
    a.evidence.push_back({"proc-mount/statfs-magic", hex(st->fs_magic), hex(kProcSuperMagic)});
  }
  if (auto entries = view.list_dir("/proc")) {
    std::size_t numeric = 0, links = 0;
    for (const auto& e : *entries) {
      if (!parse_pid_name(e.name)) continue;
      ++numeric;
      if (e.kind == FileKind::Symlink) ++links;
    }
    if (links > 0) {
      a.evidence.push_back({"proc-mount/symlink-entries",
                            std::to_string(links) + " of " + std::to_string(numeric) + " pid entries are symlinks",
                            "directories"});
    }
  }
  if (a.evidence.empty()) return {};
  return {a};
}

std::vector<Anomaly> audit_pid_max(const SystemView& view, const AuditConfig& cfg) {
  const std::string file = "/proc/sys/kernel/pid_max";
  std::vector<Anomaly> out;
  auto value = view.pid_max();
  if (!value) {
    if (value.error().code == Errc::NotFound) {
      out.push_back(finding(AnomalyKind::ProcMountSuspicious, file, Confidence::Confirmed, "pid-max/file", "missing",
                            "present"));
    } else {
      out.push_back(finding(AnomalyKind::PidMaxSuspicious, "pid_max", Confidence::Suspicious, "pid-max/file",
                            std::string("unreadable: ") + to_string(value.error().code), "readable"));
    }
    return out;
  }

  Anomaly a;
  a.kind = AnomalyKind::PidMaxSuspicious;
  a.subject = "pid_max";
  a.confidence = Confidence::Suspicious;
  if (auto pids = list_proc_pids(view); pids && !pids->empty() && pids->back().value > *value) {
    a.confidence = Confidence::Confirmed;
    a.evidence.push_back({"pid-max/listed", std::to_string(*value),
                          ">= " + std::to_string(pids->back().value) + " (highest listed pid)"});
  }
  if (*value < cfg.pid_max_floor) {
    a.evidence.push_back({"pid-max/floor", std::to_string(*value), ">= " + std::to_string(cfg.pid_max_floor)});
  }
  auto again = view.pid_max_reread();
  if (!again || *again != *value) {
    a.evidence.push_back({"pid-max/reread", again ? std::to_string(*again) : std::string("unreadable"),
                          std::to_string(*value)});
  }
  if (!a.evidence.empty()) out.push_back(std::move(a));
  return out;
}

std::vector<Anomaly> audit_tracer(const SystemView& view, const AuditConfig& cfg) {
  std::vector<Anomaly> out;
  const Pid self = view.self_pid();
  std::optional<std::int64_t> tracer;
  if (auto status = view.read_proc_file(self, "status")) {
    tracer = procfs::status_int(*status, "TracerPid");
  }
  if (!tracer) {
    out.push_back(finding(AnomalyKind::TracerPresent, "self", Confidence::Suspicious, "tracer/status",
                          "TracerPid unreadable", "TracerPid: 0"));
  } else if (*tracer != 0) {
    out.push_back(finding(AnomalyKind::TracerPresent, "self", Confidence::Confirmed, "tracer/status",
                          "TracerPid: " + std::to_string(*tracer), "TracerPid: 0"));
  }

  if (cfg.self_trace) {
    auto trace = view.attempt_self_trace();
    if (trace.status == SelfTraceStatus::Refused) {
      out.push_back(finding(AnomalyKind::TracerPresent, "self", Confidence::Suspicious, "tracer/self-trace",
                            "refused (errno " + std::to_string(trace.error) + ")", "attachable"));
    }
  }

  if (cfg.latency_baseline_ns && *cfg.latency_baseline_ns > 0 && cfg.latency_samples > 0) {
    const std::int64_t median = median_ns(view.sample_syscall_latency(cfg.latency_samples));
    const double limit = static_cast<double>(*cfg.latency_baseline_ns) * cfg.latency_factor;
    if (static_cast<double>(median) > limit) {
      out.push_back(finding(AnomalyKind::SyscallLatencyOutlier, "self", Confidence::Suspicious, "tracer/latency",
                            "median " + std::to_string(median) + " ns",
                            "<= " + std::to_string(static_cast<std::int64_t>(limit)) + " ns"));
    }
  }

  std::vector<Anomaly> merged;
  merge_anomalies(merged, std::move(out));
  return merged;
}

std::vector<Anomaly> audit_output_channel(const DescriptorState& state) {
  const auto& out = state.stdout_info();
  switch (out.kind) {
    case DescriptorKind::Pipe:
    case DescriptorKind::File:
    case DescriptorKind::Socket:
      return {finding(AnomalyKind::OutputNotTerminal, "stdout", Confidence::Suspicious, "output/stdout",
                      std::string(to_string(out.kind)) + " " + out.identity, "terminal")};
    default: return {};
  }
}

Result<std::vector<Anomaly>> audit_hidden_dirents(const SystemView& view, const std::string& path,
                                                  const std::vector<std::string>& candidates) {
  auto st = view.stat_path(path);
  if (!st) return st.error();
  if (st->kind != FileKind::Directory) return make_error(Errc::NotADirectory, path);
  auto entries = view.list_dir(path);
  if (!entries) return entries.error();

  const std::string prefix = path.back() == '/' ? path : path + "/";
  std::set<std::string> names;
  std::uint64_t subdirs = 0;
  for (const auto& e : *entries) {
    if (e.name == "." || e.name == "..") continue;
    names.insert(e.name);
    FileKind kind = e.kind;
    if (kind == FileKind::Unknown) {
      if (auto s = view.stat_path(prefix + e.name)) kind = s->kind;
    }
    if (kind == FileKind::Directory) ++subdirs;
  }

  std::vector<Anomaly> out;
  if (st->nlink >= 2 && st->nlink - 2 > subdirs) {
    out.push_back(finding(AnomalyKind::HiddenDirent, path, Confidence::Confirmed, "dirents/nlink",
                          "nlink " + std::to_string(st->nlink) + " implies " + std::to_string(st->nlink - 2) +
                              " subdirectories",
                          std::to_string(subdirs) + " listed"));
  }
  for (const auto& name : candidates) {
    if (names.count(name)) continue;
    if (view.stat_path(prefix + name)) {
      out.push_back(finding(AnomalyKind::HiddenDirent, prefix + name, Confidence::Confirmed, "dirents/stat-by-name",
                            "exists", "listed in " + path));
    }
  }
  return out;
}

std::vector<Anomaly> audit_process_count(const SystemView& view, const AuditConfig& cfg) {
  auto estimate = view.process_count_estimate();
  auto listed = listed_task_count(view);
  if (!estimate || !listed) {
    return {finding(AnomalyKind::ProcessCountMismatch, "process-count", Confidence::Suspicious, "count/listed-vs-kernel",
                    "unavailable", "both counts readable")};
  }
  std::int64_t seen = *listed;
  // The kernel counter is 16 bits wide.
  if (*estimate < 65536 && seen >= 65536) seen %= 65536;
  const std::int64_t allowed = cfg.count_tolerance.allowed(*estimate);
  if (std::llabs(seen - *estimate) <= allowed) return {};
  return {finding(AnomalyKind::ProcessCountMismatch, "process-count", Confidence::Confirmed, "count/listed-vs-kernel",
                  std::to_string(*listed) + " listed tasks",
                  std::to_string(*estimate) + " kernel tasks (tolerance " + std::to_string(allowed) + ")")};
}

std::vector<Anomaly> run_audits(const SystemView& view, const AuditConfig& cfg) {
  std::vector<Anomaly> out;
  merge_anomalies(out, audit_preload(view, cfg));
  merge_anomalies(out, audit_namespaces(view, cfg));
  merge_anomalies(out, audit_proc_mount(view));
  merge_anomalies(out, audit_pid_max(view, cfg));
  merge_anomalies(out, audit_tracer(view, cfg));
  merge_anomalies(out, audit_output_channel(view.descriptors()));
  for (const auto& path : cfg.dirent_paths) {
    auto it = cfg.dirent_candidates.find(path);
    auto found = audit_hidden_dirents(view, path, it == cfg.dirent_candidates.end() ? std::vector<std::string>{}
                                                                                    : it->second);
    if (found) {
      merge_anomalies(out, std::move(found).value());
    } else {
      merge_anomalies(out, {finding(AnomalyKind::HiddenDirent, path, Confidence::Suspicious, "dirents/read",
                                    std::string("unreadable: ") + to_string(found.error().code), "directory")});
    }
  }
  merge_anomalies(out, audit_process_count(view, cfg));
  return out;
}

}  // namespace hiddenscan
