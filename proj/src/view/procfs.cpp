#include "hiddenscan/procfs.hpp"

#include <charconv>
#include <sstream>

namespace hiddenscan::procfs {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename F>
void for_each_line(std::string_view text, F&& fn) {
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    fn(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_hex(std::string_view s, std::uint64_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out, 16);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

std::string unescape_octal(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] == '\\' && i + 3 < field.size() + 0 && i + 3 <= field.size() - 1 + 1) {
      auto oct = field.substr(i + 1, 3);
      if (oct.size() == 3 && oct.find_first_not_of("01234567") == std::string_view::npos) {
        out.push_back(static_cast<char>((oct[0] - '0') * 64 + (oct[1] - '0') * 8 + (oct[2] - '0')));
        i += 3;
        continue;
      }
    }
    out.push_back(field[i]);
  }
  return out;
}

std::uint64_t fs_magic_for_type(std::string_view fs_type) {
  struct Known {
    std::string_view name;
    std::uint64_t magic;
  };
  static constexpr Known kKnown[] = {
      {"proc", 0x9fa0},        {"tmpfs", 0x01021994}, {"sysfs", 0x62656572},
      {"devtmpfs", 0x01021994}, {"ext4", 0xef53},      {"ext3", 0xef53},
      {"ext2", 0xef53},        {"xfs", 0x58465342},   {"btrfs", 0x9123683e},
      {"overlay", 0x794c7630}, {"devpts", 0x1cd1},    {"cgroup2", 0x63677270},
      {"mqueue", 0x19800202},  {"securityfs", 0x73636673}, {"debugfs", 0x64626720},
      {"nsfs", 0x6e736673},    {"bpf", 0xcafe4a11},   {"hugetlbfs", 0x958458f6},
  };
  for (const auto& k : kKnown) {
    if (k.name == fs_type) return k.magic;
  }
  return 0;
}

std::vector<MountEntry> parse_mountinfo(std::string_view text) {
  std::vector<MountEntry> out;
  for_each_line(text, [&](std::string_view line) {
    auto f = split_ws(line);
    // id parent maj:min root mount_point options [optional...] - fstype source superopts
    std::size_t sep = 0;
    for (std::size_t i = 6; i < f.size(); ++i) {
      if (f[i] == "-") {
        sep = i;
        break;
      }
    }
    if (f.size() < 7 || sep == 0 || sep + 2 >= f.size() + 1 || sep + 1 >= f.size()) return;
    MountEntry m;
    m.root = unescape_octal(f[3]);
    m.mount_point = unescape_octal(f[4]);
    m.fs_type = std::string(f[sep + 1]);
    m.source = sep + 2 < f.size() ? unescape_octal(f[sep + 2]) : std::string();
    m.fs_magic = fs_magic_for_type(m.fs_type);
    bool shared = false;
    for (std::size_t i = 6; i < sep; ++i) {
      if (f[i].substr(0, 7) == "shared:" || f[i].substr(0, 7) == "master:") shared = true;
    }
    if (!shared) m.flags |= kMountPrivate;
    if (m.root != "/") m.flags |= kMountBind;
    out.push_back(std::move(m));
  });
  return out;
}

std::vector<MappedObject> parse_maps(std::string_view text) {
  std::vector<MappedObject> out;
  for_each_line(text, [&](std::string_view line) {
    auto f = split_ws(line);
    if (f.size() < 5) return;
    auto dash = f[0].find('-');
    if (dash == std::string_view::npos) return;
    MappedObject m;
    if (!parse_hex(f[0].substr(0, dash), m.start) || !parse_hex(f[0].substr(dash + 1), m.end)) return;
    if (m.start >= m.end) return;
    m.perms = std::string(f[1]);
    if (f.size() >= 6) {
      // The path may contain blanks; take everything after the inode column.
      auto pos = line.find(f[5], static_cast<std::size_t>(f[4].data() - line.data()) + f[4].size());
      m.path = std::string(trim(line.substr(pos)));
    } else {
      m.path = "[anonymous]";
    }
    out.push_back(std::move(m));
  });
  return out;
}

std::optional<std::string> status_field(std::string_view status, std::string_view key) {
  std::optional<std::string> found;
  for_each_line(status, [&](std::string_view line) {
    if (found) return;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) return;
    if (line.substr(0, colon) == key) found = std::string(trim(line.substr(colon + 1)));
  });
  return found;
}

std::optional<std::int64_t> status_int(std::string_view status, std::string_view key) {
  auto v = status_field(status, key);
  if (!v) return std::nullopt;
  std::string_view s = *v;
  auto end = s.find_first_of(" \t");
  s = s.substr(0, end);
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return out;
}

std::vector<std::string> split_nul(std::string_view block) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    if (block[i] == '\0') {
      if (i > start) out.emplace_back(block.substr(start, i - start));
      start = i + 1;
    }
  }
  if (start < block.size()) out.emplace_back(block.substr(start));
  return out;
}

std::string join_nul(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    out += s;
    out.push_back('\0');
  }
  return out;
}

}  // namespace hiddenscan::procfs
