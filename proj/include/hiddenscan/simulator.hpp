#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "hiddenscan/model.hpp"
#include "hiddenscan/system_view.hpp"

namespace hiddenscan {

// Concealment techniques, each acting on named view channels.

// /proc enumeration skips the pid.
struct HideFromListing {
  Pid pid;
};
// The listed probes answer "no such process" for the pid.
struct FailProbes {
  Pid pid;
  ProbeSet probes = ProbeSet::all();
};
// Process creation reports the pid as free although it is in use.
struct VforkClaim {
  Pid pid;
};
// /proc enumeration shows a pid that does not exist.
struct GhostEntry {
  Pid pid;
};
// /proc/sys/kernel/pid_max reads back `value`.
struct PidMaxTruncated {
  std::int64_t value = 0;
};
// A tmpfs of symlinks to every /proc entry except the hidden pid, plus a real
// "sys" directory, bound over /proc inside a fresh mount namespace.
// `masquerade` reports the overlay as proc in mountinfo and statfs.
struct BindMountProc {
  Pid hidden;
  bool masquerade = false;
};
// The scanner runs in a fresh pid namespace that contains only `visible`,
// renumbered from 1 with the scanner first.
struct PidNamespaceSwap {
  std::vector<Pid> visible;
};
// The variable is removed from the scanner's environment.
struct EnvStrip {
  std::string variable;
};
// Report lines matching the pattern are deleted before the user sees them.
struct OutputFilter {
  std::string pattern;
};
// Directory enumeration of `path` omits `name`.
struct TamperGetdents {
  std::string path;
  std::string name;
};
// The scanner's status shows this TracerPid. 0 also makes a self-trace
// attempt succeed, the way a tracer rewriting ptrace results would.
struct FakeTracerPid {
  std::int64_t value = 0;
};

using EvasionTransform =
    std::variant<HideFromListing, FailProbes, VforkClaim, GhostEntry, PidMaxTruncated, BindMountProc,
                 PidNamespaceSwap, EnvStrip, OutputFilter, TamperGetdents, FakeTracerPid>;

std::string transform_name(const EvasionTransform& t);
std::string describe(const EvasionTransform& t);

class InvalidTransform : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Immutable view of a model with transforms applied left to right. The only
// mutable state is the /proc enumeration counter that retires transient pids.
class SimulatedView final : public SystemView {
 public:
  SimulatedView(SystemModel model, std::vector<EvasionTransform> transforms);

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

  const SystemModel& model() const { return model_; }
  const std::vector<EvasionTransform>& transforms() const { return transforms_; }
  // Pids as the scanner names them (namespace-local after a swap) for a
  // model pid; nullopt when the pid is outside the scanner's namespace.
  std::optional<Pid> local_pid(Pid model_pid) const;
  // Rendered report text as the user receives it.
  std::string deliver(const std::string& report_text) const;

 private:
  struct PidState {
    bool listed = false;       // appears in /proc enumeration
    bool fs_visible = false;   // /proc/N answers stat/chdir/opendir
    bool alive = false;        // kernel knows the id (process or thread)
    std::uint16_t fail_mask = 0;
    std::optional<PidClaim> claim_override;
    const ProcessRecord* record = nullptr;  // owning process
    std::int64_t model_pid = 0;
  };

  void compile();
  const PidState* state_of(std::int64_t local) const;
  std::vector<DirEntry> proc_entries(bool first_enumeration) const;
  bool proc_entry_visible(std::int64_t local, const PidState& st) const;
  bool name_hidden(const std::string& dir, const std::string& name) const;
  Result<std::string> render_proc_file(const PidState& st, std::int64_t local, std::string_view name) const;
  bool scanner_traced() const;

  SystemModel model_;
  std::vector<EvasionTransform> transforms_;

  std::unordered_map<std::int64_t, PidState> pids_;  // keyed by scanner-visible pid
  std::unordered_map<std::int64_t, std::int64_t> to_local_;
  std::vector<std::int64_t> listed_;  // sorted, without transient pids
  std::vector<std::int64_t> transient_;
  std::int64_t pid_max_view_ = 0;
  std::int64_t pid_max_true_ = 0;
  NamespaceIds self_ns_;
  std::int64_t self_local_ = 0;
  std::int64_t parent_local_ = 0;
  std::vector<std::string> env_;
  std::optional<std::int64_t> fake_tracer_;
  std::vector<std::pair<std::string, std::string>> hidden_names_;  // (dir, name)
  std::vector<std::string> output_filters_;
  std::vector<MountEntry> mounts_;
  struct Overlay {
    std::int64_t hidden = 0;
    bool masquerade = false;
  };
  std::optional<Overlay> overlay_;
  std::vector<std::uint8_t> known_;  // dense membership over pids_ keys
  bool pid_ns_swapped_ = false;
  mutable std::atomic<std::uint64_t> proc_enumerations_{0};
};

std::shared_ptr<SimulatedView> apply_transforms(const SystemModel& model,
                                                const std::vector<EvasionTransform>& transforms);

// Deletes every line matching any OutputFilter pattern (ECMAScript regex,
// matched against the line without its newline).
std::string apply_output_filters(const std::string& text, const std::vector<EvasionTransform>& transforms);

}  // namespace hiddenscan
