#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hiddenscan/anomaly.hpp"
#include "hiddenscan/audit.hpp"
#include "hiddenscan/result.hpp"
#include "hiddenscan/system_view.hpp"

namespace hiddenscan {

enum class Family { Proc, Sys, Brute, Reverse };

inline constexpr std::array<Family, 4> kAllFamilies{Family::Proc, Family::Sys, Family::Brute,
                                                    Family::Reverse};

std::string_view to_string(Family f);
std::optional<Family> family_from_string(std::string_view name);

inline constexpr std::uint64_t kDefaultProbeBudget = 64'000'000;

struct ScanConfig {
  std::vector<Family> families{kAllFamilies.begin(), kAllFamilies.end()};
  std::int64_t min_pid = 301;
  int double_check_rounds = 2;
  int worker_count = 1;
  ProbeSet probe_set = ProbeSet::all();
  // Also compare thread ids against their leader's task/ listing.
  bool scan_tasks = false;
  bool budget_override = false;
  std::uint64_t budget = kDefaultProbeBudget;
  AuditConfig audit;

  bool has(Family f) const;
  // Empty when valid, else the reason.
  std::optional<std::string> validate() const;
};

enum class SummaryVerdict { Alive, Absent, Contradictory };

struct ProbeSummary {
  Pid pid;
  std::vector<ProbeOutcome> outcomes;
  SummaryVerdict verdict = SummaryVerdict::Absent;
};

// Contradictory iff both Alive and Absent outcomes are present; otherwise
// Alive when anything proves existence, else Absent.
ProbeSummary summarize(Pid pid, std::vector<ProbeOutcome> outcomes);

struct ScanCounters {
  std::uint64_t pids_listed = 0;
  std::uint64_t pids_probed = 0;
  std::uint64_t probes_issued = 0;

  void add(const ScanCounters& o) {
    pids_listed += o.pids_listed;
    pids_probed += o.pids_probed;
    probes_issued += o.probes_issued;
  }
  friend bool operator==(const ScanCounters&, const ScanCounters&) = default;
};

struct FamilyResult {
  std::vector<Anomaly> anomalies;
  ScanCounters counters;
  // Set when the family aborted, e.g. "proc: ViewUnavailable: ...".
  std::optional<std::string> partial;
};

// Probe cost of the configured sweep; see the budget guard.
std::uint64_t sweep_cost(const ScanConfig& cfg, std::int64_t pid_max);
std::uint64_t sweep_cost(const ScanConfig& cfg, std::int64_t pid_max, Family only);

Result<FamilyResult> scan_proc(const SystemView& view, const ScanConfig& cfg);
Result<FamilyResult> scan_sys(const SystemView& view, const ScanConfig& cfg);
Result<FamilyResult> scan_brute(const SystemView& view, const ScanConfig& cfg);
Result<FamilyResult> scan_reverse(const SystemView& view, const ScanConfig& cfg);
Result<FamilyResult> run_family(const SystemView& view, const ScanConfig& cfg, Family f);

struct ReportHeader {
  std::string tool_version;
  std::int64_t scanner_pid = 0;
  std::int64_t parent_pid = 0;
  std::optional<NamespaceIds> namespaces;
  DescriptorInfo stdout_info;
  std::int64_t started = 0;
  std::int64_t finished = 0;
  friend bool operator==(const ReportHeader&, const ReportHeader&) = default;
};

struct ScanReport {
  ReportHeader header;
  std::vector<Anomaly> anomalies;
  ScanCounters counters;
  std::vector<std::string> partial;

  bool clean() const { return anomalies.empty(); }
  friend bool operator==(const ScanReport&, const ScanReport&) = default;
};

// Families in the order proc, sys, brute, reverse, then every audit. Fails
// only on an invalid config or an exceeded budget; family failures become
// partial markers.
Result<ScanReport> full_scan(const SystemView& view, const ScanConfig& cfg);

// Only the audits, with the same header.
ScanReport audit_only(const SystemView& view, const ScanConfig& cfg);

}  // namespace hiddenscan
