#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hiddenscan/result.hpp"
#include "hiddenscan/types.hpp"

namespace hiddenscan {

// Read-only window onto a system. Every scan and audit goes through this
// interface; the live kernel and the evasion simulator are the two backends.
// Implementations must tolerate concurrent calls from sweep workers.
class SystemView {
 public:
  virtual ~SystemView() = default;

  // Raw entries including "." and "..".
  virtual Result<std::vector<DirEntry>> list_dir(const std::string& path) const = 0;

  virtual Result<ProbeOutcome> probe_pid(Pid pid, ProbeKind kind) const = 0;

  // name is one of status, stat, maps, environ, cmdline, ns/pid, ns/mnt,
  // ns/user. ns entries come back as their link text, e.g. "pid:[4026531836]".
  virtual Result<std::string> read_proc_file(Pid pid, std::string_view name) const = 0;

  // Arbitrary file, e.g. /etc/ld.so.preload.
  virtual Result<std::string> read_file(const std::string& path) const = 0;

  virtual Result<PathStat> stat_path(const std::string& path) const = 0;

  virtual Result<std::vector<MountEntry>> mounts() const = 0;
  virtual Result<NamespaceIds> self_namespaces() const = 0;
  virtual Result<std::int64_t> pid_max() const = 0;
  // Same file through an independent read path (no caching).
  virtual Result<std::int64_t> pid_max_reread() const = 0;
  // Kernel task total obtained without enumerating /proc.
  virtual Result<std::int64_t> process_count_estimate() const = 0;

  // Whether creating a process could be handed this pid. Only the simulator
  // can answer; live views return Unsupported.
  virtual PidClaim claim_pid(Pid pid) const = 0;

  virtual Pid self_pid() const = 0;
  virtual std::int64_t parent_pid() const = 0;
  // "NAME=value" entries as placed on the initial process stack.
  virtual std::vector<std::string> scanner_environment() const = 0;
  virtual std::string self_executable() const = 0;
  virtual SelfTraceResult attempt_self_trace() const = 0;
  // Per-call latency of a trivial system call, in nanoseconds.
  virtual std::vector<std::int64_t> sample_syscall_latency(int samples) const = 0;
  virtual DescriptorState descriptors() const = 0;
  // Seconds since the epoch.
  virtual std::int64_t now() const = 0;
};

// Numeric top-level /proc entries, ascending. Non-numeric names are dropped by
// a strict all-digits rule.
Result<std::vector<Pid>> list_proc_pids(const SystemView& view);

// "42" -> 42; anything that is not all digits (or overflows) -> nullopt.
std::optional<std::int64_t> parse_pid_name(std::string_view name);

// "pid:[4026531836]" -> 4026531836 when the type matches.
std::optional<std::uint64_t> parse_ns_link(std::string_view text, std::string_view type);
std::string format_ns_link(std::string_view type, std::uint64_t id);

Result<NamespaceIds> read_namespaces(const SystemView& view, Pid pid);

}  // namespace hiddenscan
