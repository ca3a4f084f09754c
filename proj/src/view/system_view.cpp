#include "hiddenscan/system_view.hpp"

#include <algorithm>
#include <charconv>
#include <limits>

namespace hiddenscan {

std::optional<std::int64_t> parse_pid_name(std::string_view name) {
  if (name.empty() || name.size() > 18) return std::nullopt;
  if (!std::all_of(name.begin(), name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), value);
  if (ec != std::errc{} || ptr != name.data() + name.size()) return std::nullopt;
  return value;
}

Result<std::vector<Pid>> list_proc_pids(const SystemView& view) {
  auto entries = view.list_dir("/proc");
  if (!entries) {
    return make_error(Errc::ViewUnavailable, "cannot enumerate /proc: " + entries.error().detail);
  }
  std::vector<Pid> pids;
  pids.reserve(entries->size());
  for (const auto& e : *entries) {
    if (auto v = parse_pid_name(e.name); v && *v > 0) pids.push_back(Pid{*v});
  }
  std::sort(pids.begin(), pids.end());
  pids.erase(std::unique(pids.begin(), pids.end()), pids.end());
  return pids;
}

std::optional<std::uint64_t> parse_ns_link(std::string_view text, std::string_view type) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\0')) text.remove_suffix(1);
  if (text.size() < type.size() + 3) return std::nullopt;
  if (text.substr(0, type.size()) != type) return std::nullopt;
  text.remove_prefix(type.size());
  if (text.substr(0, 2) != ":[" || text.back() != ']') return std::nullopt;
  auto digits = text.substr(2, text.size() - 3);
  if (digits.empty()) return std::nullopt;
  std::uint64_t id = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || id == 0) return std::nullopt;
  return id;
}

std::string format_ns_link(std::string_view type, std::uint64_t id) {
  return std::string(type) + ":[" + std::to_string(id) + "]";
}

Result<NamespaceIds> read_namespaces(const SystemView& view, Pid pid) {
  NamespaceIds ids;
  struct Slot {
    const char* file;
    const char* type;
    std::uint64_t* out;
  };
  const Slot slots[] = {
      {"ns/pid", "pid", &ids.pid_ns},
      {"ns/mnt", "mnt", &ids.mnt_ns},
      {"ns/user", "user", &ids.user_ns},
  };
  for (const auto& s : slots) {
    auto text = view.read_proc_file(pid, s.file);
    if (!text) return text.error();
    auto id = parse_ns_link(*text, s.type);
    if (!id) return make_error(Errc::InvalidArgument, std::string("unparseable ") + s.file + ": " + *text);
    *s.out = *id;
  }
  return ids;
}

}  // namespace hiddenscan
