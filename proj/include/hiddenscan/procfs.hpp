#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hiddenscan/types.hpp"

// Parsers for the procfs text formats the scanner reads.
namespace hiddenscan::procfs {

// /proc/PID/mountinfo. Malformed lines are skipped. A root other than "/"
// marks a bind mount; the absence of a "shared:" tag marks a private one.
std::vector<MountEntry> parse_mountinfo(std::string_view text);

// /proc/PID/maps. Lines without a path become "[anonymous]".
std::vector<MappedObject> parse_maps(std::string_view text);

// Value of a "Key:\tvalue" line of /proc/PID/status, trimmed.
std::optional<std::string> status_field(std::string_view status, std::string_view key);
std::optional<std::int64_t> status_int(std::string_view status, std::string_view key);

// NUL-separated blocks (environ, cmdline).
std::vector<std::string> split_nul(std::string_view block);
std::string join_nul(const std::vector<std::string>& items);

// Magic number for well-known filesystem type names; 0 when unknown.
std::uint64_t fs_magic_for_type(std::string_view fs_type);

// mountinfo escapes blanks as \040 and friends.
std::string unescape_octal(std::string_view field);

}  // namespace hiddenscan::procfs
