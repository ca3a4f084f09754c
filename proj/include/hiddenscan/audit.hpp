#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hiddenscan/anomaly.hpp"
#include "hiddenscan/result.hpp"
#include "hiddenscan/system_view.hpp"

namespace hiddenscan {

struct CountTolerance {
  std::int64_t absolute = 2;
  double relative = 0.01;
  std::int64_t allowed(std::int64_t estimate) const;
};

struct AuditConfig {
  // Loader variables whose presence means injection. Names that differ from
  // one of these only in the first character are reported as renames.
  std::vector<std::string> preload_variables{"LD_PRELOAD", "LD_AUDIT"};
  std::string preload_file = "/etc/ld.so.preload";
  // Executable mappings allowed besides the main executable, the loader and
  // the kernel-provided pages.
  std::vector<std::string> allowlist;

  std::int64_t pid_max_floor = 32768;
  CountTolerance count_tolerance;

  bool self_trace = true;
  int latency_samples = 31;
  double latency_factor = 10.0;
  // Median untraced latency in ns; the latency heuristic needs one.
  std::optional<std::int64_t> latency_baseline_ns;

  // Directories for the hidden-dirent audit, with optional candidate names to
  // stat by name.
  std::vector<std::string> dirent_paths;
  std::map<std::string, std::vector<std::string>> dirent_candidates;
};

std::vector<Anomaly> audit_preload(const SystemView& view, const AuditConfig& cfg);
std::vector<Anomaly> audit_namespaces(const SystemView& view, const AuditConfig& cfg);
std::vector<Anomaly> audit_proc_mount(const SystemView& view);
std::vector<Anomaly> audit_pid_max(const SystemView& view, const AuditConfig& cfg);
std::vector<Anomaly> audit_tracer(const SystemView& view, const AuditConfig& cfg);
std::vector<Anomaly> audit_output_channel(const DescriptorState& state);
Result<std::vector<Anomaly>> audit_hidden_dirents(const SystemView& view, const std::string& path,
                                                  const std::vector<std::string>& candidates = {});
std::vector<Anomaly> audit_process_count(const SystemView& view, const AuditConfig& cfg);

// Every audit above, in that order, merged by (kind, subject).
std::vector<Anomaly> run_audits(const SystemView& view, const AuditConfig& cfg);

// Sum of "Threads:" over the listed pids; an unreadable status counts as one.
Result<std::int64_t> listed_task_count(const SystemView& view);

// Median of the samples (lower middle for even sizes); 0 when empty.
std::int64_t median_ns(std::vector<std::int64_t> samples);

}  // namespace hiddenscan
