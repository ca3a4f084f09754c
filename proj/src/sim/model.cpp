#include "hiddenscan/model.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <set>

namespace hiddenscan {

const ProcessRecord* SystemModel::find(Pid pid) const {
  auto it = std::lower_bound(processes.begin(), processes.end(), pid,
                             [](const ProcessRecord& r, Pid p) { return r.pid < p; });
  return it != processes.end() && it->pid == pid ? &*it : nullptr;
}

const ProcessRecord* SystemModel::owner_of(Pid tid) const {
  if (const auto* r = find(tid)) return r;
  for (const auto& r : processes) {
    if (std::find(r.threads.begin(), r.threads.end(), tid) != r.threads.end()) return &r;
  }
  return nullptr;
}

std::int64_t SystemModel::task_count() const {
  std::int64_t n = 0;
  for (const auto& r : processes) n += 1 + static_cast<std::int64_t>(r.threads.size());
  return n;
}

void SystemModel::normalize() {
  std::sort(processes.begin(), processes.end(), [](const auto& a, const auto& b) { return a.pid < b.pid; });
  validate();
}

void SystemModel::validate() const {
  if (pid_max < 1) throw InvalidModel("pid_max must be positive");
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < processes.size(); ++i) {
    const auto& r = processes[i];
    if (i > 0 && !(processes[i - 1].pid < r.pid)) throw InvalidModel("processes not sorted or duplicated");
    if (r.pid.value < 1 || r.pid.value > pid_max) {
      throw InvalidModel("pid " + std::to_string(r.pid.value) + " outside [1, pid_max]");
    }
    if (r.comm.empty()) throw InvalidModel("pid " + std::to_string(r.pid.value) + " has an empty comm");
    if (r.ns.pid_ns == 0 || r.ns.mnt_ns == 0 || r.ns.user_ns == 0) {
      throw InvalidModel("pid " + std::to_string(r.pid.value) + " has a zero namespace id");
    }
    if (!ids.insert(r.pid.value).second) throw InvalidModel("duplicate id " + std::to_string(r.pid.value));
    for (auto t : r.threads) {
      if (t.value < 1 || t.value > pid_max) throw InvalidModel("thread id outside [1, pid_max]");
      if (!ids.insert(t.value).second) throw InvalidModel("duplicate id " + std::to_string(t.value));
    }
  }
  for (const auto& r : processes) {
    if (r.pid.value == 1) continue;
    if (r.ppid.value != 1 && !find(r.ppid)) {
      throw InvalidModel("pid " + std::to_string(r.pid.value) + " has unknown parent " + std::to_string(r.ppid.value));
    }
  }
  if (!find(scanner)) throw InvalidModel("scanner pid " + std::to_string(scanner.value) + " is not a process");
  for (const auto& [tracee, tracer] : tracers) {
    if (!find(tracee) || !find(tracer)) throw InvalidModel("tracer relation names a missing process");
  }
  for (auto t : transient) {
    if (ids.count(t.value)) throw InvalidModel("transient pid " + std::to_string(t.value) + " is alive");
  }
  for (const auto& [path, entries] : directories) {
    if (path.empty() || path[0] != '/') throw InvalidModel("directory path not absolute: " + path);
    for (const auto& e : entries) {
      if (e.name.empty() || e.name.find('/') != std::string::npos || e.name == "." || e.name == "..") {
        throw InvalidModel("bad entry name in " + path + ": " + e.name);
      }
    }
  }
  for (const auto& m : mounts) {
    if (m.mount_point.empty() || m.mount_point[0] != '/') throw InvalidModel("mount point not absolute");
  }
}

std::vector<MountEntry> default_mounts() {
  return {
      {"/", "ext4", "/dev/sda1", "/", 0xef53, 0},
      {"/proc", "proc", "proc", "/", kProcSuperMagic, 0},
      {"/sys", "sysfs", "sysfs", "/", 0x62656572, 0},
      {"/dev", "devtmpfs", "udev", "/", kTmpfsMagic, 0},
      {"/dev/pts", "devpts", "devpts", "/", 0x1cd1, 0},
      {"/tmp", "tmpfs", "tmpfs", "/", kTmpfsMagic, 0},
  };
}

std::vector<MappedObject> default_scanner_maps(const std::string& exe) {
  return {
      {exe, 0x400000, 0x401000, "r--p"},
      {exe, 0x401000, 0x4c0000, "r-xp"},
      {exe, 0x4c0000, 0x4f0000, "r--p"},
      {exe, 0x4f0000, 0x4f8000, "rw-p"},
      {"[heap]", 0x1a2b000, 0x1a4c000, "rw-p"},
      {"[stack]", 0x7ffc3a000000, 0x7ffc3a021000, "rw-p"},
      {"[vvar]", 0x7ffc3a1f0000, 0x7ffc3a1f4000, "r--p"},
      {"[vdso]", 0x7ffc3a1f4000, 0x7ffc3a1f6000, "r-xp"},
  };
}

namespace {

std::vector<std::string> default_env() {
  return {"PATH=/usr/local/sbin:/usr/local/bin:/usr/sbin:/usr/bin:/sbin:/bin", "HOME=/root", "TERM=xterm-256color",
          "SHELL=/bin/bash", "LANG=C.UTF-8", "USER=root"};
}

ProcessRecord init_record() {
  ProcessRecord r;
  r.pid = Pid{1};
  r.ppid = Pid{0};
  r.comm = "systemd";
  r.cmdline = {"/sbin/init"};
  r.pgid = Pid{1};
  r.sid = Pid{1};
  return r;
}

}  // namespace

SystemModel make_model(std::vector<ProcessRecord> processes, Pid scanner, std::int64_t pid_max) {
  SystemModel m;
  m.pid_max = pid_max;
  m.processes = std::move(processes);
  auto has = [&](Pid p) {
    return std::any_of(m.processes.begin(), m.processes.end(), [&](const auto& r) { return r.pid == p; });
  };
  if (!has(Pid{1})) m.processes.push_back(init_record());
  if (!has(scanner)) {
    ProcessRecord r;
    r.pid = scanner;
    r.ppid = Pid{1};
    r.comm = "hiddenscan";
    r.cmdline = {m.scanner_exe, "scan"};
    r.state = ProcessState::Running;
    r.pgid = scanner;
    r.sid = scanner;
    m.processes.push_back(std::move(r));
  }
  m.scanner = scanner;
  m.mounts = default_mounts();
  m.scanner_maps = default_scanner_maps(m.scanner_exe);
  m.env_of_scanner = default_env();
  m.normalize();
  return m;
}

std::vector<Pid> brute_oracle(const SystemModel& model) {
  std::vector<Pid> out;
  out.reserve(model.processes.size());
  for (const auto& r : model.processes) out.push_back(r.pid);
  std::sort(out.begin(), out.end());
  return out;
}

SystemModel generate_model(std::uint64_t seed, std::size_t size, std::int64_t pid_max) {
  if (size < 1) throw InvalidModel("size must be at least 1");
  if (static_cast<std::int64_t>(size) > pid_max) throw InvalidModel("size exceeds pid_max");

  // Own reduction from the raw engine output keeps the model identical across
  // standard libraries.
  std::mt19937_64 rng(seed);
  auto next = [&](std::uint64_t n) { return n == 0 ? 0 : rng() % n; };

  static constexpr std::array<const char*, 16> kComms{
      "kworker", "sshd",    "bash",     "cron",     "rsyslogd", "nginx",  "postgres", "python3",
      "sleep",   "dbus-daemon", "agetty", "containerd", "node",   "java",   "redis-server", "tmux"};

  std::vector<std::size_t> threads(size, 0);
  std::size_t total = size;
  for (std::size_t i = 1; i + 1 < size; ++i) {
    if (next(8) == 0) {
      threads[i] = 1 + next(4);
      total += threads[i];
    }
  }
  if (static_cast<std::int64_t>(total) > pid_max) {
    std::fill(threads.begin(), threads.end(), 0);
    total = size;
  }

  SystemModel m;
  m.pid_max = pid_max;
  m.processes.reserve(size);
  m.processes.push_back(init_record());

  const std::int64_t spread = std::max<std::int64_t>(1, (pid_max - 1) / static_cast<std::int64_t>(total));
  std::int64_t cur = 1;
  std::int64_t remaining = static_cast<std::int64_t>(total) - 1;
  auto alloc = [&](std::int64_t max_gap) {
    std::int64_t gap = 1 + static_cast<std::int64_t>(next(static_cast<std::uint64_t>(max_gap)));
    if (cur + gap + (remaining - 1) > pid_max) gap = 1;
    cur += gap;
    --remaining;
    return Pid{cur};
  };

  for (std::size_t i = 1; i < size; ++i) {
    ProcessRecord r;
    r.pid = alloc(spread);
    const auto& parent = m.processes[next(i)];
    r.ppid = parent.pid;
    const bool last = i + 1 == size;
    r.comm = last ? "hiddenscan" : kComms[next(kComms.size())];
    r.cmdline = last ? std::vector<std::string>{"/usr/local/bin/hiddenscan", "scan"}
                     : std::vector<std::string>{"/usr/bin/" + r.comm};
    if (!last && next(3) == 0) r.cmdline.push_back("--opt=" + std::to_string(next(100)));
    r.state = last || next(10) == 0 ? ProcessState::Running : ProcessState::Sleeping;
    r.uid = next(3) == 0 ? 1000 + static_cast<std::int64_t>(next(3)) : 0;
    const bool leader = next(4) == 0;
    r.pgid = leader ? r.pid : parent.pgid;
    r.sid = leader && next(2) == 0 ? r.pid : parent.sid;
    for (std::size_t t = 0; t < threads[i]; ++t) r.threads.push_back(alloc(3));
    m.processes.push_back(std::move(r));
  }

  m.scanner = m.processes.back().pid;
  m.mounts = default_mounts();
  m.scanner_maps = default_scanner_maps(m.scanner_exe);
  m.env_of_scanner = default_env();

  // A small directory tree for the dirent audit.
  const std::string base = "/srv/data";
  std::vector<DirEntry> top;
  std::uint64_t inode = 131072 + next(1000);
  const std::size_t files = 1 + next(4);
  const std::size_t dirs = next(3);
  for (std::size_t f = 0; f < files; ++f) top.push_back({"file" + std::to_string(f) + ".dat", inode++, FileKind::Regular});
  for (std::size_t d = 0; d < dirs; ++d) {
    std::string name = "dir" + std::to_string(d);
    top.push_back({name, inode++, FileKind::Directory});
    m.directories[base + "/" + name] = {{"notes.txt", inode++, FileKind::Regular}};
  }
  m.directories[base] = std::move(top);

  m.normalize();
  return m;
}

}  // namespace hiddenscan
