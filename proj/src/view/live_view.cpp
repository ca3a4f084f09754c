#include "hiddenscan/live_view.hpp"

#include <dirent.h>
#include <fcntl.h>
#include <sys/ioctl.h>
#include <sys/resource.h>
#include <linux/sched.h>
#include <sys/prctl.h>
#include <sys/ptrace.h>
#include <sys/stat.h>
#include <sys/statfs.h>
#include <sys/sysinfo.h>
#include <sys/wait.h>
#include <sched.h>
#include <signal.h>
#include <termios.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstring>

#include "hiddenscan/procfs.hpp"
#include "raw_syscall.hpp"

namespace hiddenscan {

namespace {

struct Dirent64 {
  std::uint64_t d_ino;
  std::int64_t d_off;
  unsigned short d_reclen;
  unsigned char d_type;
  char d_name[1];
};

Errc errc_from(long rc) {
  switch (-rc) {
    case ENOENT:
    case ESRCH: return Errc::NotFound;
    case EACCES:
    case EPERM: return Errc::PermissionDenied;
    case ENOTDIR: return Errc::NotADirectory;
    default: return Errc::Io;
  }
}

Error error_from(long rc, const std::string& what) {
  return make_error(errc_from(rc), what + ": " + std::strerror(static_cast<int>(-rc)));
}

class Fd {
 public:
  explicit Fd(long fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() {
    if (fd_ >= 0) raw::call(SYS_close, fd_);
  }
  long get() const { return fd_; }
  bool ok() const { return fd_ >= 0; }

 private:
  long fd_;
};

long open_at(long dirfd, const char* path, int flags) {
  return raw::call(SYS_openat, dirfd, path, flags | O_CLOEXEC, 0);
}

Result<std::string> read_all(long fd, const std::string& what) {
  std::string out;
  std::array<char, 16384> buf;
  for (;;) {
    long n = raw::call(SYS_read, fd, buf.data(), buf.size());
    if (n == -EINTR) continue;
    if (n < 0) return error_from(n, "read " + what);
    if (n == 0) break;
    out.append(buf.data(), static_cast<std::size_t>(n));
  }
  return out;
}

Result<std::string> read_path(const std::string& path) {
  Fd fd(open_at(AT_FDCWD, path.c_str(), O_RDONLY));
  if (!fd.ok()) return error_from(fd.get(), "open " + path);
  return read_all(fd.get(), path);
}

Result<std::string> read_link(const std::string& path) {
  std::array<char, 4096> buf;
  long n = raw::call(SYS_readlinkat, AT_FDCWD, path.c_str(), buf.data(), buf.size());
  if (n < 0) return error_from(n, "readlink " + path);
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

FileKind kind_from_dtype(unsigned char t) {
  switch (t) {
    case DT_REG: return FileKind::Regular;
    case DT_DIR: return FileKind::Directory;
    case DT_LNK: return FileKind::Symlink;
    case DT_FIFO: return FileKind::Fifo;
    case DT_SOCK: return FileKind::Socket;
    case DT_BLK: return FileKind::BlockDev;
    case DT_CHR: return FileKind::CharDev;
    default: return FileKind::Unknown;
  }
}

FileKind kind_from_mode(unsigned mode) {
  switch (mode & S_IFMT) {
    case S_IFREG: return FileKind::Regular;
    case S_IFDIR: return FileKind::Directory;
    case S_IFLNK: return FileKind::Symlink;
    case S_IFIFO: return FileKind::Fifo;
    case S_IFSOCK: return FileKind::Socket;
    case S_IFBLK: return FileKind::BlockDev;
    case S_IFCHR: return FileKind::CharDev;
    default: return FileKind::Unknown;
  }
}

ProbeOutcome outcome_from(ProbeKind kind, long rc) {
  if (rc >= 0) return ProbeOutcome::alive(kind);
  switch (-rc) {
    case ESRCH:
    case ENOENT: return ProbeOutcome::absent(kind);
    case EPERM:
    case EACCES: return ProbeOutcome::denied(kind);
    default: return ProbeOutcome::inconclusive(kind);
  }
}

Result<std::int64_t> parse_int(const std::string& text, const std::string& what) {
  std::string_view s = text;
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.remove_suffix(1);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    return make_error(Errc::Io, "unparseable " + what + ": " + text);
  }
  return v;
}

constexpr std::array<std::string_view, 8> kProcFileNames{
    "status", "stat", "maps", "environ", "cmdline", "ns/pid", "ns/mnt", "ns/user",
};

}  // namespace

LiveView::LiveView(std::optional<std::vector<std::string>> initial_env) : initial_env_(std::move(initial_env)) {}

bool LiveView::supported() {
#if defined(__linux__) && (defined(__x86_64__) || defined(__aarch64__))
  return true;
#else
  return false;
#endif
}

Result<std::vector<DirEntry>> LiveView::list_dir(const std::string& path) const {
  Fd fd(open_at(AT_FDCWD, path.c_str(), O_RDONLY | O_DIRECTORY));
  if (!fd.ok()) return error_from(fd.get(), "open " + path);
  std::vector<DirEntry> out;
  alignas(8) std::array<char, 32768> buf;
  for (;;) {
    long n = raw::call(SYS_getdents64, fd.get(), buf.data(), buf.size());
    if (n == -EINTR) continue;
    if (n < 0) return error_from(n, "getdents64 " + path);
    if (n == 0) break;
    for (long off = 0; off < n;) {
      auto* d = reinterpret_cast<const Dirent64*>(buf.data() + off);
      out.push_back(DirEntry{std::string(d->d_name), d->d_ino, kind_from_dtype(d->d_type)});
      off += d->d_reclen;
    }
  }
  return out;
}

Result<ProbeOutcome> LiveView::probe_pid(Pid pid, ProbeKind kind) const {
  if (pid.value <= 0 || pid.value > 0x7fffffff) return make_error(Errc::InvalidArgument, "pid out of range");
  const long p = static_cast<long>(pid.value);
  const std::string dir = "/proc/" + std::to_string(pid.value);
  switch (kind) {
    case ProbeKind::Stat: {
      struct stat st;
      return outcome_from(kind, raw::call(SYS_newfstatat, AT_FDCWD, dir.c_str(), &st, 0));
    }
    case ProbeKind::Chdir: {
      std::lock_guard lock(chdir_mutex_);
      Fd saved(open_at(AT_FDCWD, ".", O_RDONLY | O_DIRECTORY | O_PATH));
      if (!saved.ok()) return make_error(Errc::UnsupportedProbe, "cannot save working directory");
      long rc = raw::call(SYS_chdir, dir.c_str());
      if (rc == 0) raw::call(SYS_fchdir, saved.get());
      return outcome_from(kind, rc);
    }
    case ProbeKind::Opendir: {
      Fd fd(open_at(AT_FDCWD, dir.c_str(), O_RDONLY | O_DIRECTORY));
      return outcome_from(kind, fd.ok() ? 0 : fd.get());
    }
    case ProbeKind::GetPriority:
      return outcome_from(kind, raw::call(SYS_getpriority, PRIO_PROCESS, p));
    case ProbeKind::GetPgid: return outcome_from(kind, raw::call(SYS_getpgid, p));
    case ProbeKind::GetSid: return outcome_from(kind, raw::call(SYS_getsid, p));
    case ProbeKind::KillZero: return outcome_from(kind, raw::call(SYS_kill, p, 0));
    case ProbeKind::SchedGetAffinity: {
      std::array<unsigned long, 16> mask{};
      return outcome_from(kind, raw::call(SYS_sched_getaffinity, p, sizeof(mask), mask.data()));
    }
    case ProbeKind::SchedGetParam: {
      struct sched_param param {};
      return outcome_from(kind, raw::call(SYS_sched_getparam, p, &param));
    }
    case ProbeKind::SchedGetScheduler:
      return outcome_from(kind, raw::call(SYS_sched_getscheduler, p));
    case ProbeKind::SchedRrGetInterval: {
      struct timespec ts {};
      return outcome_from(kind, raw::call(SYS_sched_rr_get_interval, p, &ts));
    }
  }
  return make_error(Errc::UnsupportedProbe, std::string(to_string(kind)));
}

Result<std::string> LiveView::read_proc_file(Pid pid, std::string_view name) const {
  if (std::find(kProcFileNames.begin(), kProcFileNames.end(), name) == kProcFileNames.end()) {
    return make_error(Errc::InvalidArgument, "unsupported proc file " + std::string(name));
  }
  const std::string path = "/proc/" + std::to_string(pid.value) + "/" + std::string(name);
  if (name.substr(0, 3) == "ns/") return read_link(path);
  return read_path(path);
}

Result<std::string> LiveView::read_file(const std::string& path) const { return read_path(path); }

Result<PathStat> LiveView::stat_path(const std::string& path) const {
  struct stat st;
  long rc = raw::call(SYS_newfstatat, AT_FDCWD, path.c_str(), &st, AT_SYMLINK_NOFOLLOW);
  if (rc < 0) return error_from(rc, "stat " + path);
  PathStat out;
  out.kind = kind_from_mode(st.st_mode);
  out.nlink = st.st_nlink;
  out.inode = st.st_ino;
  struct statfs sfs;
  if (raw::call(SYS_statfs, path.c_str(), &sfs) == 0) out.fs_magic = static_cast<std::uint64_t>(sfs.f_type);
  return out;
}

Result<std::vector<MountEntry>> LiveView::mounts() const {
  auto text = read_path("/proc/self/mountinfo");
  if (!text) return make_error(Errc::ViewUnavailable, text.error().detail);
  return procfs::parse_mountinfo(*text);
}

Result<NamespaceIds> LiveView::self_namespaces() const { return read_namespaces(*this, self_pid()); }

Result<std::int64_t> LiveView::pid_max() const {
  std::call_once(pid_max_once_, [this] {
    auto text = read_path("/proc/sys/kernel/pid_max");
    if (!text) {
      pid_max_cache_.emplace(text.error());
    } else {
      pid_max_cache_.emplace(parse_int(*text, "pid_max"));
    }
  });
  return *pid_max_cache_;
}

Result<std::int64_t> LiveView::pid_max_reread() const {
  Fd dir(open_at(AT_FDCWD, "/proc/sys/kernel", O_RDONLY | O_DIRECTORY));
  if (!dir.ok()) return error_from(dir.get(), "open /proc/sys/kernel");
  Fd fd(open_at(dir.get(), "pid_max", O_RDONLY));
  if (!fd.ok()) return error_from(fd.get(), "open pid_max");
  std::array<char, 64> buf;
  long n = raw::call(SYS_pread64, fd.get(), buf.data(), buf.size(), 0);
  if (n < 0) return error_from(n, "pread pid_max");
  return parse_int(std::string(buf.data(), static_cast<std::size_t>(n)), "pid_max");
}

Result<std::int64_t> LiveView::process_count_estimate() const {
  struct sysinfo info {};
  long rc = raw::call(SYS_sysinfo, &info);
  if (rc < 0) return make_error(Errc::ViewUnavailable, "sysinfo failed");
  return static_cast<std::int64_t>(info.procs);
}

PidClaim LiveView::claim_pid(Pid) const { return PidClaim::Unsupported; }

Pid LiveView::self_pid() const { return Pid{raw::call(SYS_getpid)}; }

std::int64_t LiveView::parent_pid() const { return raw::call(SYS_getppid); }

std::vector<std::string> LiveView::scanner_environment() const {
  if (initial_env_) return *initial_env_;
  auto block = read_path("/proc/self/environ");
  if (!block) return {};
  return procfs::split_nul(*block);
}

std::string LiveView::self_executable() const { return read_link("/proc/self/exe").value_or(std::string()); }

SelfTraceResult LiveView::attempt_self_trace() const {
  int fds[2];
  if (raw::call(SYS_pipe2, fds, O_CLOEXEC) < 0) return {SelfTraceStatus::Unsupported, 0};
  long child = raw::call(SYS_clone, SIGCHLD, 0, 0, 0, 0);
  if (child == 0) {
    // Child: raw calls only. Wait for the go-ahead, then try to seize the
    // parent. Exiting drops the attachment again.
    char c = 0;
    raw::call(SYS_read, fds[0], &c, 1);
    long parent = raw::call(SYS_getppid);
    long rc = raw::call(SYS_ptrace, PTRACE_SEIZE, parent, 0, 0);
    raw::call(SYS_exit_group, rc == 0 ? 0 : (-rc) & 0xff);
    __builtin_unreachable();
  }
  if (child < 0) {
    raw::call(SYS_close, fds[0]);
    raw::call(SYS_close, fds[1]);
    return {SelfTraceStatus::Unsupported, static_cast<int>(-child)};
  }
  // Yama scope 1 would otherwise refuse a child tracing its parent.
  raw::call(SYS_prctl, PR_SET_PTRACER, child, 0, 0, 0);
  char go = 1;
  raw::call(SYS_write, fds[1], &go, 1);
  int status = 0;
  long w;
  do {
    w = raw::call(SYS_wait4, child, &status, 0, 0);
  } while (w == -EINTR);
  raw::call(SYS_prctl, PR_SET_PTRACER, 0, 0, 0, 0);
  raw::call(SYS_close, fds[0]);
  raw::call(SYS_close, fds[1]);
  if (w < 0 || !WIFEXITED(status)) return {SelfTraceStatus::Unsupported, 0};
  int code = WEXITSTATUS(status);
  if (code == 0) return {SelfTraceStatus::Untraced, 0};
  if (code == EPERM) return {SelfTraceStatus::Refused, EPERM};
  return {SelfTraceStatus::Unsupported, code};
}

std::vector<std::int64_t> LiveView::sample_syscall_latency(int samples) const {
  constexpr int kBatch = 64;
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(std::max(samples, 0)));
  for (int s = 0; s < samples; ++s) {
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < kBatch; ++i) raw::call(SYS_getppid);
    auto t1 = std::chrono::steady_clock::now();
    out.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() / kBatch);
  }
  return out;
}

DescriptorState LiveView::descriptors() const {
  DescriptorState state;
  for (int fd = 0; fd < 3; ++fd) {
    DescriptorInfo info;
    struct stat st;
    long rc = raw::call(SYS_fstat, fd, &st);
    if (rc < 0) {
      state.fds[static_cast<std::size_t>(fd)] = DescriptorInfo{DescriptorKind::Closed, ""};
      continue;
    }
    alignas(8) std::array<char, 128> termios_buf{};
    switch (st.st_mode & S_IFMT) {
      case S_IFCHR:
        info.kind = raw::call(SYS_ioctl, fd, TCGETS, termios_buf.data()) == 0 ? DescriptorKind::Terminal
                                                                               : DescriptorKind::Other;
        break;
      case S_IFIFO: info.kind = DescriptorKind::Pipe; break;
      case S_IFREG: info.kind = DescriptorKind::File; break;
      case S_IFSOCK: info.kind = DescriptorKind::Socket; break;
      default: info.kind = DescriptorKind::Other; break;
    }
    info.identity = read_link("/proc/self/fd/" + std::to_string(fd)).value_or(std::string("?"));
    state.fds[static_cast<std::size_t>(fd)] = info;
  }
  return state;
}

std::int64_t LiveView::now() const {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace hiddenscan
