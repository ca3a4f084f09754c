#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "hiddenscan/model.hpp"
#include "hiddenscan/scan.hpp"
#include "hiddenscan/simulator.hpp"

namespace testutil {

using namespace hiddenscan;

inline ProcessRecord proc(std::int64_t pid, std::int64_t ppid = 1, std::string comm = "sleep") {
  ProcessRecord r;
  r.pid = Pid{pid};
  r.ppid = Pid{ppid};
  r.comm = std::move(comm);
  r.cmdline = {r.comm};
  r.pgid = r.pid;
  r.sid = r.pid;
  return r;
}

// Scan settings for small simulated models: exact counts, no budget guard.
inline ScanConfig sim_config(const SystemModel& m) {
  ScanConfig cfg;
  cfg.budget_override = true;
  cfg.audit.count_tolerance = CountTolerance{0, 0.0};
  cfg.audit.latency_baseline_ns = m.latency.base_ns;
  for (const auto& [path, entries] : m.directories) cfg.audit.dirent_paths.push_back(path);
  return cfg;
}

inline bool has_anomaly(const std::vector<Anomaly>& as, AnomalyKind kind, const std::string& subject) {
  return std::any_of(as.begin(), as.end(), [&](const Anomaly& a) { return a.kind == kind && a.subject == subject; });
}

inline const Anomaly* find_anomaly(const std::vector<Anomaly>& as, AnomalyKind kind) {
  auto it = std::find_if(as.begin(), as.end(), [&](const Anomaly& a) { return a.kind == kind; });
  return it == as.end() ? nullptr : &*it;
}

inline std::vector<std::string> subjects(const std::vector<Anomaly>& as) {
  std::vector<std::string> out;
  for (const auto& a : as) out.push_back(a.subject);
  return out;
}

}  // namespace testutil
