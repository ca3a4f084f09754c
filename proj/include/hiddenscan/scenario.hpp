#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hiddenscan/model.hpp"
#include "hiddenscan/result.hpp"
#include "hiddenscan/scan.hpp"
#include "hiddenscan/simulator.hpp"

namespace hiddenscan {

// Columns of the detection matrix: the four scan families, the audits and
// the report integrity check.
enum class Check {
  Proc,
  Sys,
  Brute,
  Reverse,
  Preload,
  Namespaces,
  ProcMount,
  PidMax,
  Tracer,
  OutputChannel,
  HiddenDirents,
  ProcessCount,
  Integrity,
};

inline constexpr std::size_t kCheckCount = 13;
inline constexpr std::array<Check, kCheckCount> kAllChecks{
    Check::Proc,    Check::Sys,        Check::Brute,  Check::Reverse,       Check::Preload,
    Check::Namespaces, Check::ProcMount, Check::PidMax, Check::Tracer,      Check::OutputChannel,
    Check::HiddenDirents, Check::ProcessCount, Check::Integrity,
};

std::string_view to_string(Check c);
std::optional<Check> check_from_string(std::string_view name);
// Evidence prefix the check's findings carry, e.g. "proc/" or "pid-max/".
std::string_view evidence_prefix(Check c);

enum class Cell { Detects, Blind, SuspiciousOnly };
enum class Provenance { Paper, Derived };

std::string_view to_string(Cell c);
std::optional<Cell> cell_from_string(std::string_view name);
std::string_view to_string(Provenance p);

using MatrixRow = std::array<Cell, kCheckCount>;

inline Cell& at(MatrixRow& row, Check c) { return row[static_cast<std::size_t>(c)]; }
inline Cell at(const MatrixRow& row, Check c) { return row[static_cast<std::size_t>(c)]; }

struct Scenario {
  std::string name;
  std::string category;  // paper, layered, single, clean
  std::string description;
  // Model pid the scan-family columns look for.
  std::optional<Pid> target;
  SystemModel model;
  std::vector<EvasionTransform> transforms;
  MatrixRow expected{};
  std::array<Provenance, kCheckCount> provenance{};
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Scenario parse_scenario(std::string_view yaml_text);
Scenario load_scenario(const std::filesystem::path& path);
// Every *.yaml / *.yml under dir, sorted by file name. Names must be unique.
std::vector<Scenario> load_scenarios(const std::filesystem::path& dir);

struct ScenarioOutcome {
  MatrixRow observed{};
  bool pass = false;
  std::vector<std::string> mismatches;  // "proc: expected detects, observed blind"
  ScanReport report;
  std::string delivered_text;
};

// Scan settings the simulator always uses: override on, zero count tolerance,
// the model's directories for the dirent audit and its latency as baseline.
ScanConfig scenario_config(const Scenario& s, const ScanConfig& base);

MatrixRow observe(const Scenario& s, const SimulatedView& view, const ScanReport& report,
                  const std::string& delivered_text);

ScenarioOutcome run_scenario(const Scenario& s, const ScanConfig& base = {});

std::string format_row(const MatrixRow& row);

}  // namespace hiddenscan
