#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hiddenscan/system_view.hpp"

namespace hiddenscan {

// The running kernel, observed through direct system calls only. No libc
// wrapper that a preloaded library could interpose sits on these paths.
class LiveView final : public SystemView {
 public:
  // `initial_env` is the envp block main() received, i.e. the strings on the
  // initial process stack. Without it /proc/self/environ is read instead.
  explicit LiveView(std::optional<std::vector<std::string>> initial_env = std::nullopt);

  static bool supported();

  Result<std::vector<DirEntry>> list_dir(const std::string& path) const override;
  Result<ProbeOutcome> probe_pid(Pid pid, ProbeKind kind) const override;
  Result<std::string> read_proc_file(Pid pid, std::string_view name) const override;
  Result<std::string> read_file(const std::string& path) const override;
  Result<PathStat> stat_path(const std::string& path) const override;
  Result<std::vector<MountEntry>> mounts() const override;
  Result<NamespaceIds> self_namespaces() const override;
  Result<std::int64_t> pid_max() const override;
  Result<std::int64_t> pid_max_reread() const override;
  Result<std::int64_t> process_count_estimate() const override;
  PidClaim claim_pid(Pid pid) const override;
  Pid self_pid() const override;
  std::int64_t parent_pid() const override;
  std::vector<std::string> scanner_environment() const override;
  std::string self_executable() const override;
  SelfTraceResult attempt_self_trace() const override;
  std::vector<std::int64_t> sample_syscall_latency(int samples) const override;
  DescriptorState descriptors() const override;
  std::int64_t now() const override;

 private:
  std::optional<std::vector<std::string>> initial_env_;
  mutable std::once_flag pid_max_once_;
  mutable std::optional<Result<std::int64_t>> pid_max_cache_;
  // chdir changes the whole process; probes take turns.
  mutable std::mutex chdir_mutex_;
};

}  // namespace hiddenscan
