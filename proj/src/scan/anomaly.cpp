#include "hiddenscan/anomaly.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "hiddenscan/system_view.hpp"

namespace hiddenscan {

namespace {

constexpr std::array<std::string_view, kAnomalyKindCount> kKindNames{
    "HiddenFromListing",  "GhostListing",        "ContradictoryProbes",   "PidMaxSuspicious",
    "NamespaceMismatch",  "ProcMountSuspicious", "PreloadEnvActive",      "PreloadFileActive",
    "UnexpectedMappedObject", "TracerPresent",   "OutputNotTerminal",     "SyscallLatencyOutlier",
    "HiddenDirent",       "ProcessCountMismatch",
};

// Pids compare numerically and sort before any non-numeric subject.
bool subject_less(const std::string& a, const std::string& b) {
  auto pa = parse_pid_name(a);
  auto pb = parse_pid_name(b);
  if (pa && pb) return *pa < *pb;
  if (pa != pb) return pa.has_value();
  return a < b;
}

}  // namespace

std::string_view to_string(AnomalyKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<AnomalyKind> anomaly_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<AnomalyKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Confidence c) { return c == Confidence::Confirmed ? "Confirmed" : "Suspicious"; }

std::optional<Confidence> confidence_from_string(std::string_view name) {
  if (name == "Confirmed") return Confidence::Confirmed;
  if (name == "Suspicious") return Confidence::Suspicious;
  return std::nullopt;
}

std::optional<Pid> Anomaly::subject_pid() const {
  if (auto v = parse_pid_name(subject)) return Pid{*v};
  return std::nullopt;
}

std::string pid_subject(Pid pid) { return std::to_string(pid.value); }

void merge_anomalies(std::vector<Anomaly>& into, std::vector<Anomaly> more) {
  std::map<std::pair<AnomalyKind, std::string>, std::size_t> index;
  for (std::size_t i = 0; i < into.size(); ++i) index.emplace(std::make_pair(into[i].kind, into[i].subject), i);
  for (auto& a : more) {
    auto key = std::make_pair(a.kind, a.subject);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, into.size());
      into.push_back(std::move(a));
      continue;
    }
    Anomaly& slot = into[it->second];
    for (auto& e : a.evidence) {
      if (std::find(slot.evidence.begin(), slot.evidence.end(), e) == slot.evidence.end()) {
        slot.evidence.push_back(std::move(e));
      }
    }
    if (a.confidence == Confidence::Confirmed) slot.confidence = Confidence::Confirmed;
  }
}

void sort_anomalies(std::vector<Anomaly>& anomalies) {
  std::stable_sort(anomalies.begin(), anomalies.end(), [](const Anomaly& a, const Anomaly& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.subject != b.subject) return subject_less(a.subject, b.subject);
    return false;
  });
}

}  // namespace hiddenscan
