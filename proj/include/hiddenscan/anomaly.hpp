#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hiddenscan/types.hpp"

namespace hiddenscan {

enum class AnomalyKind {
  HiddenFromListing,
  GhostListing,
  ContradictoryProbes,
  PidMaxSuspicious,
  NamespaceMismatch,
  ProcMountSuspicious,
  PreloadEnvActive,
  PreloadFileActive,
  UnexpectedMappedObject,
  TracerPresent,
  OutputNotTerminal,
  SyscallLatencyOutlier,
  HiddenDirent,
  ProcessCountMismatch,
};

inline constexpr std::size_t kAnomalyKindCount = 14;

enum class Confidence { Confirmed, Suspicious };

std::string_view to_string(AnomalyKind kind);
std::optional<AnomalyKind> anomaly_kind_from_string(std::string_view name);
std::string_view to_string(Confidence c);
std::optional<Confidence> confidence_from_string(std::string_view name);

// One observation. `check` is prefixed by the family or audit that made it,
// e.g. "sys/getpriority" or "proc-mount/fs-magic".
struct Evidence {
  std::string check;
  std::string observed;
  std::string expected;
  friend bool operator==(const Evidence&, const Evidence&) = default;
  friend auto operator<=>(const Evidence&, const Evidence&) = default;
};

struct Anomaly {
  AnomalyKind kind = AnomalyKind::HiddenFromListing;
  // Decimal pid, absolute path or a fixed label such as "process-count".
  std::string subject;
  std::vector<Evidence> evidence;
  Confidence confidence = Confidence::Suspicious;

  std::optional<Pid> subject_pid() const;
  friend bool operator==(const Anomaly&, const Anomaly&) = default;
  friend auto operator<=>(const Anomaly&, const Anomaly&) = default;
};

std::string pid_subject(Pid pid);

// Merge by (kind, subject), first occurrence wins its slot. Later evidence is
// appended (exact duplicates dropped) and confidence rises to Confirmed if any
// occurrence was Confirmed.
void merge_anomalies(std::vector<Anomaly>& into, std::vector<Anomaly> more);

// Deterministic order used by reports: kind, then numeric-aware subject.
void sort_anomalies(std::vector<Anomaly>& anomalies);

}  // namespace hiddenscan
