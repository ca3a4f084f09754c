#include "hiddenscan/report.hpp"

#include <sodium.h>

#include <json.hpp>

#include <ctime>
#include <sstream>

namespace hiddenscan {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kIntegrityPrefix = "integrity: ";

std::string to_hex(const unsigned char* data, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(n * 2, '0');
  for (std::size_t i = 0; i < n; ++i) {
    out[2 * i] = kDigits[data[i] >> 4];
    out[2 * i + 1] = kDigits[data[i] & 0xf];
  }
  return out;
}

// Evidence text stays on one line so line-based framing holds.
std::string one_line(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else out += c;
  }
  return out;
}

std::string integrity_line(std::string_view body) {
  std::size_t lines = 0;
  for (char c : body) lines += c == '\n' ? 1 : 0;
  std::ostringstream os;
  os << kIntegrityPrefix << "lines=" << lines << " bytes=" << body.size() << " sha256=" << sha256_hex(body)
     << " trail=" << line_trail(body) << " " << kIntegrityTrailer << "\n";
  return os.str();
}

// Start offsets of each line of body.
std::vector<std::size_t> line_starts(std::string_view body) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    out.push_back(pos);
    auto nl = body.find('\n', pos);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

std::optional<std::size_t> first_divergence(std::string_view body, std::string_view claimed_trail) {
  const std::string actual = line_trail(body);
  const auto starts = line_starts(body);
  const std::size_t n = std::min(actual.size(), claimed_trail.size()) / 2;
  for (std::size_t i = 0; i < n; ++i) {
    if (actual.compare(2 * i, 2, claimed_trail.substr(2 * i, 2)) != 0) {
      return i < starts.size() ? starts[i] : body.size();
    }
  }
  if (actual.size() != claimed_trail.size()) {
    return n < starts.size() ? starts[n] : body.size();
  }
  return std::nullopt;
}

std::string field(std::string_view line, std::string_view key) {
  const std::string needle = " " + std::string(key) + "=";
  auto pos = line.find(needle);
  if (pos == std::string_view::npos) return {};
  pos += needle.size();
  auto end = line.find(' ', pos);
  return std::string(line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
}

ojson header_json(const ReportHeader& h) {
  ojson j;
  j["tool"] = h.tool_version;
  j["scanner_pid"] = h.scanner_pid;
  j["parent_pid"] = h.parent_pid;
  if (h.namespaces) {
    j["namespaces"] = {{"pid", h.namespaces->pid_ns}, {"mnt", h.namespaces->mnt_ns}, {"user", h.namespaces->user_ns}};
  } else {
    j["namespaces"] = nullptr;
  }
  j["stdout"] = {{"kind", std::string(to_string(h.stdout_info.kind))}, {"identity", h.stdout_info.identity}};
  j["started"] = h.started;
  j["finished"] = h.finished;
  return j;
}

ojson anomaly_json(const Anomaly& a) {
  ojson j;
  j["format"] = std::string(kReportFormat);
  j["record"] = "anomaly";
  j["kind"] = std::string(to_string(a.kind));
  j["subject"] = a.subject;
  j["confidence"] = std::string(to_string(a.confidence));
  ojson ev = ojson::array();
  for (const auto& e : a.evidence) ev.push_back({{"check", e.check}, {"observed", e.observed}, {"expected", e.expected}});
  j["evidence"] = std::move(ev);
  return j;
}

ojson integrity_json(const ScanReport& r, std::string_view body) {
  std::size_t lines = 0;
  for (char c : body) lines += c == '\n' ? 1 : 0;
  ojson j;
  j["format"] = std::string(kReportFormat);
  j["record"] = "integrity";
  j["header"] = header_json(r.header);
  j["counters"] = {{"pids_listed", r.counters.pids_listed},
                   {"pids_probed", r.counters.pids_probed},
                   {"probes_issued", r.counters.probes_issued}};
  j["partial"] = r.partial;
  j["records"] = lines;
  j["bytes"] = body.size();
  j["note"] = std::string(kIntegrityTrailer.substr(1, kIntegrityTrailer.size() - 2));
  return j;
}

// The digest covers the prior records and this record minus the digest key.
std::string machine_digest(std::string_view body, const ojson& record_without_digest) {
  std::string covered(body);
  covered += record_without_digest.dump();
  return "sha256:" + sha256_hex(covered);
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  static const int init = sodium_init();
  (void)init;
  unsigned char out[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(out, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  return to_hex(out, sizeof out);
}

std::string line_trail(std::string_view body) {
  std::string out;
  unsigned char chain[crypto_hash_sha256_BYTES] = {};
  crypto_hash_sha256_state st;
  for (auto start : line_starts(body)) {
    auto nl = body.find('\n', start);
    const std::size_t end = nl == std::string_view::npos ? body.size() : nl + 1;
    crypto_hash_sha256_init(&st);
    crypto_hash_sha256_update(&st, chain, sizeof chain);
    crypto_hash_sha256_update(&st, reinterpret_cast<const unsigned char*>(body.data() + start), end - start);
    crypto_hash_sha256_final(&st, chain);
    out += to_hex(chain, 1);
  }
  return out;
}

std::string iso_utc(std::int64_t epoch_seconds) {
  std::time_t t = static_cast<std::time_t>(epoch_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string_view to_string(IntegrityStatus s) {
  switch (s) {
    case IntegrityStatus::Intact: return "intact";
    case IntegrityStatus::Tampered: return "tampered";
    case IntegrityStatus::MissingIntegrityLine: return "missing integrity line";
  }
  return "unknown";
}

std::string render_text(const ScanReport& report) {
  const auto& h = report.header;
  std::ostringstream os;
  os << "format: " << kReportFormat << "\n";
  os << "tool: " << h.tool_version << "\n";
  os << "scanner-pid: " << h.scanner_pid << "\n";
  os << "parent-pid: " << h.parent_pid << "\n";
  if (h.namespaces) {
    os << "namespaces: " << format_ns_link("pid", h.namespaces->pid_ns) << " "
       << format_ns_link("mnt", h.namespaces->mnt_ns) << " " << format_ns_link("user", h.namespaces->user_ns) << "\n";
  } else {
    os << "namespaces: unavailable\n";
  }
  os << "stdout: " << one_line(h.stdout_info.identity) << " (" << to_string(h.stdout_info.kind) << ")\n";
  os << "started: " << iso_utc(h.started) << "\n";
  os << "finished: " << iso_utc(h.finished) << "\n";
  for (const auto& p : report.partial) os << "partial: " << one_line(p) << "\n";

  auto evidence = [&](const Anomaly& a) {
    for (const auto& e : a.evidence) {
      os << "\t" << one_line(e.check) << ": " << one_line(e.observed) << " (expected " << one_line(e.expected)
         << ")\n";
    }
  };
  for (const auto& a : report.anomalies) {
    if (a.kind != AnomalyKind::HiddenFromListing) continue;
    os << "Found HIDDEN PID: " << one_line(a.subject) << "\n";
    os << "\tconfidence: " << to_string(a.confidence) << "\n";
    evidence(a);
  }
  for (const auto& a : report.anomalies) {
    if (a.kind == AnomalyKind::HiddenFromListing) continue;
    os << to_string(a.kind) << ": " << one_line(a.subject) << " [" << to_string(a.confidence) << "]\n";
    evidence(a);
  }
  os << "counters: pids-listed=" << report.counters.pids_listed << " pids-probed=" << report.counters.pids_probed
     << " probes-issued=" << report.counters.probes_issued << "\n";
  std::string body = os.str();
  return body + integrity_line(body);
}

IntegrityCheck verify_integrity(std::string_view text) {
  IntegrityCheck out;
  if (text.empty() || text.back() != '\n') {
    // The integrity line always ends the text with a newline.
    auto last = text.rfind('\n');
    std::string_view tail = last == std::string_view::npos ? text : text.substr(last + 1);
    if (tail.rfind(kIntegrityPrefix, 0) != 0) {
      out.status = IntegrityStatus::MissingIntegrityLine;
      out.reason = "no integrity line at end of text";
      return out;
    }
    out.status = IntegrityStatus::Tampered;
    out.first_bad_offset = last == std::string_view::npos ? 0 : last + 1;
    out.reason = "integrity line is not newline-terminated";
    return out;
  }
  const auto prev = text.rfind('\n', text.size() - 2);
  const std::size_t start = prev == std::string_view::npos ? 0 : prev + 1;
  const std::string_view last = text.substr(start);
  const std::string_view body = text.substr(0, start);
  if (last.rfind(kIntegrityPrefix, 0) != 0) {
    out.status = IntegrityStatus::MissingIntegrityLine;
    out.reason = "no integrity line at end of text";
    return out;
  }
  const std::string expected = integrity_line(body);
  if (expected == last) {
    out.status = IntegrityStatus::Intact;
    return out;
  }
  out.status = IntegrityStatus::Tampered;
  const std::string claimed_lines = field(last, "lines");
  const std::string claimed_bytes = field(last, "bytes");
  const std::string claimed_trail = field(last, "trail");
  if (field(expected, "lines") != claimed_lines) {
    out.reason = "line count mismatch (claimed " + claimed_lines + ", found " + field(expected, "lines") + ")";
  } else if (field(expected, "bytes") != claimed_bytes) {
    out.reason = "byte count mismatch (claimed " + claimed_bytes + ", found " + field(expected, "bytes") + ")";
  } else if (field(expected, "sha256") != field(last, "sha256")) {
    out.reason = "sha256 digest mismatch";
  } else {
    out.reason = "integrity line altered";
  }
  out.first_bad_offset = first_divergence(body, claimed_trail);
  if (!out.first_bad_offset) out.first_bad_offset = start;
  return out;
}

std::string render_machine(const ScanReport& report) {
  std::string body;
  for (const auto& a : report.anomalies) body += anomaly_json(a).dump() + "\n";
  ojson integ = integrity_json(report, body);
  const std::string digest = machine_digest(body, integ);
  integ["digest"] = digest;
  return body + integ.dump() + "\n";
}

IntegrityCheck verify_machine(std::string_view text) {
  IntegrityCheck out;
  if (text.empty() || text.back() != '\n') {
    out.status = IntegrityStatus::MissingIntegrityLine;
    out.reason = "text does not end with a complete record";
    return out;
  }
  const auto prev = text.rfind('\n', text.size() - 2);
  const std::size_t start = prev == std::string_view::npos ? 0 : prev + 1;
  const std::string_view body = text.substr(0, start);
  ojson rec = ojson::parse(text.substr(start, text.size() - start - 1), nullptr, false);
  if (rec.is_discarded() || !rec.is_object() || rec.value("record", "") != "integrity" || !rec.contains("digest") ||
      !rec["digest"].is_string()) {
    out.status = IntegrityStatus::MissingIntegrityLine;
    out.reason = "last record is not an integrity record";
    return out;
  }
  const std::string claimed = rec["digest"].get<std::string>();
  rec.erase("digest");
  const std::string actual = machine_digest(body, rec);
  // The record must also be in canonical form, otherwise reformatting would pass.
  ojson canon = rec;
  canon["digest"] = claimed;
  if (claimed == actual && canon.dump() == text.substr(start, text.size() - start - 1)) {
    out.status = IntegrityStatus::Intact;
    return out;
  }
  out.status = IntegrityStatus::Tampered;
  out.reason = claimed == actual ? "integrity record not canonical" : "digest mismatch";
  out.first_bad_offset = start;
  return out;
}

Result<ScanReport> parse_machine(std::string_view text) {
  auto check = verify_machine(text);
  if (!check.ok()) return make_error(Errc::InvalidArgument, "machine report: " + check.reason);
  ScanReport r;
  std::size_t pos = 0;
  try {
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      ojson rec = ojson::parse(text.substr(pos, nl - pos));
      pos = nl + 1;
      if (rec.at("format").get<std::string>() != kReportFormat) {
        return make_error(Errc::InvalidArgument, "unsupported format " + rec.at("format").get<std::string>());
      }
      const std::string kind = rec.at("record").get<std::string>();
      if (kind == "anomaly") {
        Anomaly a;
        auto k = anomaly_kind_from_string(rec.at("kind").get<std::string>());
        auto c = confidence_from_string(rec.at("confidence").get<std::string>());
        if (!k || !c) return make_error(Errc::InvalidArgument, "bad anomaly kind or confidence");
        a.kind = *k;
        a.confidence = *c;
        a.subject = rec.at("subject").get<std::string>();
        for (const auto& e : rec.at("evidence")) {
          a.evidence.push_back({e.at("check").get<std::string>(), e.at("observed").get<std::string>(),
                                e.at("expected").get<std::string>()});
        }
        r.anomalies.push_back(std::move(a));
        continue;
      }
      if (kind != "integrity" || pos != text.size()) return make_error(Errc::InvalidArgument, "unexpected record");
      const auto& h = rec.at("header");
      r.header.tool_version = h.at("tool").get<std::string>();
      r.header.scanner_pid = h.at("scanner_pid").get<std::int64_t>();
      r.header.parent_pid = h.at("parent_pid").get<std::int64_t>();
      if (!h.at("namespaces").is_null()) {
        const auto& ns = h.at("namespaces");
        r.header.namespaces = NamespaceIds{ns.at("pid").get<std::uint64_t>(), ns.at("mnt").get<std::uint64_t>(),
                                           ns.at("user").get<std::uint64_t>()};
      }
      auto dk = descriptor_kind_from_string(h.at("stdout").at("kind").get<std::string>());
      if (!dk) return make_error(Errc::InvalidArgument, "bad stdout kind");
      r.header.stdout_info = {*dk, h.at("stdout").at("identity").get<std::string>()};
      r.header.started = h.at("started").get<std::int64_t>();
      r.header.finished = h.at("finished").get<std::int64_t>();
      const auto& c = rec.at("counters");
      r.counters.pids_listed = c.at("pids_listed").get<std::uint64_t>();
      r.counters.pids_probed = c.at("pids_probed").get<std::uint64_t>();
      r.counters.probes_issued = c.at("probes_issued").get<std::uint64_t>();
      r.partial = rec.at("partial").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    return make_error(Errc::InvalidArgument, std::string("machine report: ") + e.what());
  }
  return r;
}

}  // namespace hiddenscan
