#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hiddenscan {

struct Pid {
  std::int64_t value = 0;
  friend constexpr auto operator<=>(const Pid&, const Pid&) = default;
};

inline constexpr std::int64_t kDefaultPidMax = 4194304;  // 2^22
inline constexpr std::uint64_t kProcSuperMagic = 0x9fa0;
inline constexpr std::uint64_t kTmpfsMagic = 0x01021994;

enum class ProcessState { Running, Sleeping, Stopped, Zombie };

struct NamespaceIds {
  std::uint64_t pid_ns = 0;
  std::uint64_t mnt_ns = 0;
  std::uint64_t user_ns = 0;
  friend bool operator==(const NamespaceIds&, const NamespaceIds&) = default;
};

// Stock ids of the initial namespaces on a typical kernel.
inline constexpr NamespaceIds kInitNamespaces{4026531836, 4026531841, 4026531837};

struct ProcessRecord {
  Pid pid;
  Pid ppid;
  std::string comm;
  std::vector<std::string> cmdline;
  ProcessState state = ProcessState::Sleeping;
  std::int64_t uid = 0;
  Pid pgid;
  Pid sid;
  NamespaceIds ns = kInitNamespaces;
  // Extra thread ids; the leader itself is not listed here.
  std::vector<Pid> threads;

  friend bool operator==(const ProcessRecord&, const ProcessRecord&) = default;
};

enum MountFlag : unsigned {
  kMountBind = 1u << 0,
  kMountPrivate = 1u << 1,
  kMountRecursive = 1u << 2,
};

struct MountEntry {
  std::string mount_point;
  std::string fs_type;
  std::string source;
  std::string root = "/";
  std::uint64_t fs_magic = 0;
  unsigned flags = 0;

  bool has(MountFlag f) const { return (flags & f) != 0; }
  friend bool operator==(const MountEntry&, const MountEntry&) = default;
};

enum class ProbeKind : std::uint8_t {
  Stat,
  Chdir,
  Opendir,
  GetPriority,
  GetPgid,
  GetSid,
  KillZero,
  SchedGetAffinity,
  SchedGetParam,
  SchedGetScheduler,
  SchedRrGetInterval,
};

inline constexpr std::size_t kProbeKindCount = 11;

inline constexpr std::array<ProbeKind, kProbeKindCount> kAllProbes{
    ProbeKind::Stat,          ProbeKind::Chdir,           ProbeKind::Opendir,
    ProbeKind::GetPriority,   ProbeKind::GetPgid,         ProbeKind::GetSid,
    ProbeKind::KillZero,      ProbeKind::SchedGetAffinity, ProbeKind::SchedGetParam,
    ProbeKind::SchedGetScheduler, ProbeKind::SchedRrGetInterval,
};

inline constexpr std::array<ProbeKind, 3> kFilesystemProbes{ProbeKind::Stat, ProbeKind::Chdir,
                                                             ProbeKind::Opendir};

inline constexpr std::array<ProbeKind, 8> kSyscallProbes{
    ProbeKind::GetPriority,      ProbeKind::GetPgid,       ProbeKind::GetSid,
    ProbeKind::KillZero,         ProbeKind::SchedGetAffinity, ProbeKind::SchedGetParam,
    ProbeKind::SchedGetScheduler, ProbeKind::SchedRrGetInterval,
};

std::string_view to_string(ProbeKind kind);
std::optional<ProbeKind> probe_kind_from_string(std::string_view name);

class ProbeSet {
 public:
  constexpr ProbeSet() = default;
  template <std::size_t N>
  constexpr explicit ProbeSet(const std::array<ProbeKind, N>& kinds) {
    for (auto k : kinds) insert(k);
  }

  static constexpr ProbeSet all() { return ProbeSet(kAllProbes); }

  constexpr void insert(ProbeKind k) { bits_ |= bit(k); }
  constexpr bool contains(ProbeKind k) const { return (bits_ & bit(k)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint16_t bits() const { return bits_; }
  std::size_t size() const;
  std::vector<ProbeKind> kinds() const;
  ProbeSet intersect(const ProbeSet& other) const {
    ProbeSet out;
    out.bits_ = bits_ & other.bits_;
    return out;
  }

  friend constexpr bool operator==(const ProbeSet&, const ProbeSet&) = default;

 private:
  static constexpr std::uint16_t bit(ProbeKind k) {
    return static_cast<std::uint16_t>(1u << static_cast<unsigned>(k));
  }
  std::uint16_t bits_ = 0;
};

enum class Verdict { Alive, Absent, Denied, Inconclusive };
enum class ErrnoClass { NoEntity, PermissionDenied, Other };

std::string_view to_string(Verdict v);

struct ProbeOutcome {
  ProbeKind kind = ProbeKind::Stat;
  Verdict verdict = Verdict::Inconclusive;
  std::optional<ErrnoClass> errno_class;

  static ProbeOutcome alive(ProbeKind k) { return {k, Verdict::Alive, std::nullopt}; }
  static ProbeOutcome absent(ProbeKind k) { return {k, Verdict::Absent, ErrnoClass::NoEntity}; }
  static ProbeOutcome denied(ProbeKind k) { return {k, Verdict::Denied, ErrnoClass::PermissionDenied}; }
  static ProbeOutcome inconclusive(ProbeKind k) { return {k, Verdict::Inconclusive, ErrnoClass::Other}; }

  // Existence evidence: a probe refused for permission still proves the pid is taken.
  bool proves_existence() const { return verdict == Verdict::Alive || verdict == Verdict::Denied; }

  friend bool operator==(const ProbeOutcome&, const ProbeOutcome&) = default;
};

enum class FileKind { Regular, Directory, Symlink, Fifo, Socket, BlockDev, CharDev, Unknown };

std::string_view to_string(FileKind kind);
std::optional<FileKind> file_kind_from_string(std::string_view name);

struct DirEntry {
  std::string name;
  std::uint64_t inode = 0;
  FileKind kind = FileKind::Unknown;
  friend bool operator==(const DirEntry&, const DirEntry&) = default;
};

struct PathStat {
  FileKind kind = FileKind::Unknown;
  std::uint64_t nlink = 0;
  std::uint64_t inode = 0;
  std::uint64_t fs_magic = 0;
  friend bool operator==(const PathStat&, const PathStat&) = default;
};

enum class PidClaim { Claimable, InUse, Unsupported };

enum class SelfTraceStatus { Untraced, Refused, Unsupported };

struct SelfTraceResult {
  SelfTraceStatus status = SelfTraceStatus::Unsupported;
  int error = 0;
  friend bool operator==(const SelfTraceResult&, const SelfTraceResult&) = default;
};

enum class DescriptorKind { Terminal, Pipe, File, Socket, Other, Closed };

std::string_view to_string(DescriptorKind kind);
std::optional<DescriptorKind> descriptor_kind_from_string(std::string_view name);

struct DescriptorInfo {
  DescriptorKind kind = DescriptorKind::Terminal;
  std::string identity;
  friend bool operator==(const DescriptorInfo&, const DescriptorInfo&) = default;
};

// fds 0, 1 and 2.
struct DescriptorState {
  std::array<DescriptorInfo, 3> fds{
      DescriptorInfo{DescriptorKind::Terminal, "/dev/pts/0"},
      DescriptorInfo{DescriptorKind::Terminal, "/dev/pts/0"},
      DescriptorInfo{DescriptorKind::Terminal, "/dev/pts/0"},
  };
  const DescriptorInfo& stdout_info() const { return fds[1]; }
  friend bool operator==(const DescriptorState&, const DescriptorState&) = default;
};

struct MappedObject {
  std::string path;  // absolute path or "[anonymous]" / "[vdso]" style pseudo names
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  std::string perms;  // "r-xp"

  bool executable() const { return perms.size() >= 3 && perms[2] == 'x'; }
  friend bool operator==(const MappedObject&, const MappedObject&) = default;
};

}  // namespace hiddenscan

template <>
struct std::hash<hiddenscan::Pid> {
  std::size_t operator()(const hiddenscan::Pid& p) const noexcept {
    return std::hash<std::int64_t>{}(p.value);
  }
};
