#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "hiddenscan/result.hpp"
#include "hiddenscan/scan.hpp"

namespace hiddenscan {

inline constexpr std::string_view kReportFormat = "v1";
inline constexpr std::string_view kIntegrityTrailer = "(tamper-evident, not tamper-proof)";

std::string sha256_hex(std::string_view bytes);

// Per-line chained one-byte digests, hex. Byte i depends on line i and on
// every byte before it, so the first differing byte locates the first
// damaged line.
std::string line_trail(std::string_view body);

std::string iso_utc(std::int64_t epoch_seconds);

std::string render_text(const ScanReport& report);
std::string render_machine(const ScanReport& report);

// Inverse of render_machine. Fails on malformed input or a broken digest.
Result<ScanReport> parse_machine(std::string_view text);

enum class IntegrityStatus { Intact, Tampered, MissingIntegrityLine };

struct IntegrityCheck {
  IntegrityStatus status = IntegrityStatus::MissingIntegrityLine;
  // Byte offset of the first line that no longer matches, when known.
  std::optional<std::size_t> first_bad_offset;
  std::string reason;
  bool ok() const { return status == IntegrityStatus::Intact; }
};

std::string_view to_string(IntegrityStatus s);

// Works on text reports.
IntegrityCheck verify_integrity(std::string_view text);
// Works on machine reports.
IntegrityCheck verify_machine(std::string_view text);

}  // namespace hiddenscan
