#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiddenscan/types.hpp"

namespace hiddenscan {

struct LatencyModel {
  std::int64_t base_ns = 120;
  // Multiplier while the scanner is traced.
  std::int64_t traced_factor = 50;
  friend bool operator==(const LatencyModel&, const LatencyModel&) = default;
};

class InvalidModel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ground truth for the simulator.
struct SystemModel {
  std::vector<ProcessRecord> processes;  // sorted by pid
  std::int64_t pid_max = kDefaultPidMax;
  std::vector<MountEntry> mounts;
  // Directory contents without "." and "..". /proc is synthesized from the
  // process table and never stored here.
  std::map<std::string, std::vector<DirEntry>> directories;
  std::map<Pid, Pid> tracers;  // tracee -> tracer
  std::vector<std::string> env_of_scanner;
  NamespaceIds init_ns = kInitNamespaces;

  Pid scanner{1};
  std::string scanner_exe = "/usr/local/bin/hiddenscan";
  std::optional<std::string> preload_file;
  std::vector<MappedObject> scanner_maps;
  // Listed by the first /proc enumeration only, then gone: a process that
  // exited between rounds.
  std::vector<Pid> transient;
  DescriptorState descriptors;
  LatencyModel latency;
  std::int64_t clock = 1700000000;

  const ProcessRecord* find(Pid pid) const;
  bool alive(Pid pid) const { return find(pid) != nullptr; }
  // Thread id -> owning process, leaders map to themselves.
  const ProcessRecord* owner_of(Pid tid) const;
  std::int64_t task_count() const;

  // Sorts processes and throws InvalidModel on a broken invariant.
  void normalize();
  void validate() const;

  friend bool operator==(const SystemModel&, const SystemModel&) = default;
};

std::vector<MountEntry> default_mounts();
std::vector<MappedObject> default_scanner_maps(const std::string& exe);

// A model with just init and the scanner filled in around `processes`.
SystemModel make_model(std::vector<ProcessRecord> processes, Pid scanner,
                       std::int64_t pid_max = kDefaultPidMax);

// Alive process ids by direct traversal, ascending. Ignores every transform.
std::vector<Pid> brute_oracle(const SystemModel& model);

inline constexpr std::int64_t kGeneratedPidMax = 32768;

// Deterministic in (seed, size, pid_max). Pid 1 is init, ppid links form a
// tree rooted at it, the scanner is the highest pid.
SystemModel generate_model(std::uint64_t seed, std::size_t size,
                           std::int64_t pid_max = kGeneratedPidMax);

}  // namespace hiddenscan
