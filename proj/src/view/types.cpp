#include "hiddenscan/result.hpp"
#include "hiddenscan/types.hpp"

#include <bit>

namespace hiddenscan {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::ViewUnavailable: return "ViewUnavailable";
    case Errc::NotFound: return "NotFound";
    case Errc::PermissionDenied: return "PermissionDenied";
    case Errc::NotADirectory: return "NotADirectory";
    case Errc::UnsupportedProbe: return "UnsupportedProbe";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::PidSpaceTooLarge: return "PidSpaceTooLarge";
    case Errc::Io: return "Io";
  }
  return "Io";
}

namespace {

constexpr std::array<std::string_view, kProbeKindCount> kProbeNames{
    "stat",        "chdir",        "opendir",         "getpriority",
    "getpgid",     "getsid",       "kill",            "sched_getaffinity",
    "sched_getparam", "sched_getscheduler", "sched_rr_get_interval",
};

constexpr std::array<std::string_view, 8> kFileKindNames{
    "regular", "directory", "symlink", "fifo", "socket", "block", "char", "unknown",
};

constexpr std::array<std::string_view, 6> kDescriptorKindNames{
    "terminal", "pipe", "file", "socket", "other", "closed",
};

}  // namespace

std::string_view to_string(ProbeKind kind) { return kProbeNames[static_cast<std::size_t>(kind)]; }

std::optional<ProbeKind> probe_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kProbeNames.size(); ++i) {
    if (kProbeNames[i] == name) return static_cast<ProbeKind>(i);
  }
  return std::nullopt;
}

std::size_t ProbeSet::size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<ProbeKind> ProbeSet::kinds() const {
  std::vector<ProbeKind> out;
  for (auto k : kAllProbes) {
    if (contains(k)) out.push_back(k);
  }
  return out;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Alive: return "Alive";
    case Verdict::Absent: return "Absent";
    case Verdict::Denied: return "Denied";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

std::string_view to_string(FileKind kind) { return kFileKindNames[static_cast<std::size_t>(kind)]; }

std::optional<FileKind> file_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kFileKindNames.size(); ++i) {
    if (kFileKindNames[i] == name) return static_cast<FileKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(DescriptorKind kind) {
  return kDescriptorKindNames[static_cast<std::size_t>(kind)];
}

std::optional<DescriptorKind> descriptor_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kDescriptorKindNames.size(); ++i) {
    if (kDescriptorKindNames[i] == name) return static_cast<DescriptorKind>(i);
  }
  return std::nullopt;
}

}  // namespace hiddenscan
