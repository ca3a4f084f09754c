#include "hiddenscan/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "hiddenscan/live_view.hpp"
#include "hiddenscan/report.hpp"
#include "hiddenscan/scan.hpp"
#include "hiddenscan/scenario.hpp"
#include "hiddenscan/version.hpp"

namespace hiddenscan {

namespace {

struct Options {
  std::string checks = "proc,sys,brute,reverse";
  std::int64_t min_pid = 301;
  int rounds = 2;
  int workers = 1;
  std::string output = "text";
  bool budget_override = false;
  bool tasks = false;
  std::string allowlist;
  double latency_factor = 10.0;
  std::optional<std::int64_t> latency_baseline;
  std::string fixture;
  std::vector<std::string> dirent_paths;
  int samples = 31;
  std::vector<std::string> scenario_paths;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<Family> parse_checks(const std::string& text) {
  std::vector<Family> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto f = family_from_string(item);
    if (!f) throw UsageError("unknown check '" + item + "' (expected proc, sys, brute or reverse)");
    if (std::find(out.begin(), out.end(), *f) == out.end()) out.push_back(*f);
  }
  if (out.empty()) throw UsageError("--checks needs at least one of proc, sys, brute, reverse");
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> read_allowlist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read allowlist " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    auto end = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(start, end - start + 1));
  }
  return out;
}

ScanConfig build_config(const Options& o) {
  ScanConfig cfg;
  cfg.families = parse_checks(o.checks);
  cfg.min_pid = o.min_pid;
  cfg.double_check_rounds = o.rounds;
  cfg.worker_count = o.workers;
  cfg.budget_override = o.budget_override;
  cfg.scan_tasks = o.tasks;
  if (!o.allowlist.empty()) cfg.audit.allowlist = read_allowlist(o.allowlist);
  cfg.audit.latency_factor = o.latency_factor;
  cfg.audit.latency_baseline_ns = o.latency_baseline;
  cfg.audit.dirent_paths = o.dirent_paths;
  if (auto why = cfg.validate()) throw UsageError(*why);
  return cfg;
}

// The view a command runs against plus how its output reaches the user.
struct Target {
  std::shared_ptr<const SystemView> view;
  std::shared_ptr<const SimulatedView> sim;
  std::optional<Scenario> scenario;

  std::string deliver(const std::string& text) const { return sim ? sim->deliver(text) : text; }
};

std::optional<Target> open_target(const Options& o, std::optional<std::vector<std::string>> envp,
                                  std::ostream& err) {
  Target t;
  if (!o.fixture.empty()) {
    try {
      t.scenario = load_scenario(o.fixture);
    } catch (const ScenarioError& e) {
      err << "error: " << e.what() << "\n";
      return std::nullopt;
    }
    t.sim = apply_transforms(t.scenario->model, t.scenario->transforms);
    t.view = t.sim;
    return t;
  }
  if (!LiveView::supported()) {
    err << "error: the live backend needs Linux with a mounted /proc; use --fixture or simulate\n";
    return std::nullopt;
  }
  t.view = std::make_shared<LiveView>(std::move(envp));
  return t;
}

// Fixture runs take the scenario's audit settings but keep the user's budget choice.
ScanConfig effective_config(const Target& t, ScanConfig cfg) {
  if (!t.scenario) return cfg;
  const bool override_budget = cfg.budget_override;
  const auto dirents = cfg.audit.dirent_paths;
  const auto baseline = cfg.audit.latency_baseline_ns;
  cfg = scenario_config(*t.scenario, cfg);
  cfg.budget_override = override_budget;
  for (const auto& d : dirents) cfg.audit.dirent_paths.push_back(d);
  if (baseline) cfg.audit.latency_baseline_ns = baseline;
  return cfg;
}

int emit(const Target& t, const ScanReport& report, const Options& o, std::ostream& out) {
  const std::string text = o.output == "machine" ? render_machine(report) : render_text(report);
  out << t.deliver(text);
  out.flush();
  if (!report.partial.empty()) return kExitPartial;
  return report.clean() ? kExitClean : kExitAnomalies;
}

int cmd_scan(const Options& o, std::optional<std::vector<std::string>> envp, std::ostream& out, std::ostream& err) {
  ScanConfig cfg = build_config(o);
  auto t = open_target(o, std::move(envp), err);
  if (!t) return kExitError;
  cfg = effective_config(*t, cfg);
  auto report = full_scan(*t->view, cfg);
  if (!report) {
    err << "error: " << to_string(report.error().code) << ": " << report.error().detail << "\n";
    if (report.error().code == Errc::PidSpaceTooLarge) err << "hint: pass --budget-override to sweep anyway\n";
    return kExitError;
  }
  for (const auto& p : report->partial) err << "warning: partial result: " << p << "\n";
  return emit(*t, *report, o, out);
}

int cmd_audit(const Options& o, std::optional<std::vector<std::string>> envp, std::ostream& out, std::ostream& err) {
  ScanConfig cfg = build_config(o);
  auto t = open_target(o, std::move(envp), err);
  if (!t) return kExitError;
  cfg = effective_config(*t, cfg);
  return emit(*t, audit_only(*t->view, cfg), o, out);
}

int cmd_simulate(const Options& o, const ScanConfig& base, std::ostream& out, std::ostream& err) {
  if (o.scenario_paths.empty()) throw UsageError("simulate needs at least one scenario file or directory");
  std::vector<Scenario> scenarios;
  try {
    for (const auto& p : o.scenario_paths) {
      if (std::filesystem::is_directory(p)) {
        auto more = load_scenarios(p);
        std::move(more.begin(), more.end(), std::back_inserter(scenarios));
      } else {
        scenarios.push_back(load_scenario(p));
      }
    }
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  std::size_t mismatches = 0;
  std::size_t failed = 0;
  for (const auto& s : scenarios) {
    auto outcome = run_scenario(s, base);
    out << (outcome.pass ? "PASS " : "FAIL ") << s.name << "  " << format_row(outcome.observed) << "\n";
    for (const auto& m : outcome.mismatches) out << "  mismatch: " << m << "\n";
    mismatches += outcome.mismatches.size();
    failed += outcome.pass ? 0 : 1;
  }
  out << "scenarios: " << scenarios.size() << " failed: " << failed << " mismatches: " << mismatches << "\n";
  return failed == 0 ? kExitClean : kExitAnomalies;
}

int cmd_calibrate(const Options& o, std::optional<std::vector<std::string>> envp, std::ostream& out,
                  std::ostream& err) {
  if (o.samples < 1) throw UsageError("--samples must be at least 1");
  auto t = open_target(o, std::move(envp), err);
  if (!t) return kExitError;
  auto samples = t->view->sample_syscall_latency(o.samples);
  if (samples.empty()) {
    err << "error: no latency samples\n";
    return kExitError;
  }
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  out << "samples: " << samples.size() << "\n";
  out << "min-ns: " << *lo << "\n";
  out << "median-ns: " << median_ns(samples) << "\n";
  out << "max-ns: " << *hi << "\n";
  out << "suggested: --latency-baseline " << median_ns(samples) << "\n";
  return kExitClean;
}

void add_scan_flags(CLI::App* sub, Options& o) {
  sub->add_option("--checks", o.checks, "Comma-separated scan families: proc,sys,brute,reverse");
  sub->add_option("--min-pid", o.min_pid, "Lowest pid swept")->check(CLI::PositiveNumber);
  sub->add_option("--rounds", o.rounds, "Double-check rounds")->check(CLI::PositiveNumber);
  sub->add_option("--workers", o.workers, "Sweep worker threads")->check(CLI::PositiveNumber);
  sub->add_flag("--budget-override", o.budget_override, "Sweep even when the probe budget is exceeded");
  sub->add_flag("--tasks", o.tasks, "Compare thread ids against their leader's task listing");
}

void add_audit_flags(CLI::App* sub, Options& o) {
  sub->add_option("--output", o.output, "Report format")->check(CLI::IsMember({"text", "machine"}));
  sub->add_option("--allowlist", o.allowlist, "File of extra allowed executable mappings, one per line");
  sub->add_option("--latency-factor", o.latency_factor, "Latency outlier factor")->check(CLI::PositiveNumber);
  sub->add_option("--latency-baseline", o.latency_baseline, "Untraced median syscall latency in ns")
      ->check(CLI::PositiveNumber);
  sub->add_option("--dirent-path", o.dirent_paths, "Directory to check for hidden entries (repeatable)");
  sub->add_option("--fixture", o.fixture, "Scenario file to run against instead of the live system");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        std::optional<std::vector<std::string>> envp) {
  Options o;
  CLI::App app{"Hidden process and user-space rootkit evasion detector", kToolName};
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  app.require_subcommand(1, 1);

  auto* scan = app.add_subcommand("scan", "Cross-view pid scans plus every audit");
  add_scan_flags(scan, o);
  add_audit_flags(scan, o);
  auto* audit = app.add_subcommand("audit", "Environment audits only");
  add_audit_flags(audit, o);
  auto* simulate = app.add_subcommand("simulate", "Run evasion scenarios offline and compare the detection matrix");
  simulate->add_option("paths", o.scenario_paths, "Scenario files or directories")->required();
  add_scan_flags(simulate, o);
  auto* calibrate = app.add_subcommand("calibrate", "Measure the untraced syscall latency baseline");
  calibrate->add_option("--samples", o.samples, "Number of samples");
  calibrate->add_option("--fixture", o.fixture, "Scenario file to measure instead of the live system");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitError;
  }

  try {
    if (*scan) return cmd_scan(o, std::move(envp), out, err);
    if (*audit) return cmd_audit(o, std::move(envp), out, err);
    if (*simulate) return cmd_simulate(o, build_config(o), out, err);
    if (*calibrate) return cmd_calibrate(o, std::move(envp), out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  err << app.help();
  return kExitError;
}

}  // namespace hiddenscan
