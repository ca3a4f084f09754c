#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hiddenscan {

inline constexpr int kExitClean = 0;
inline constexpr int kExitAnomalies = 1;
inline constexpr int kExitError = 2;
inline constexpr int kExitPartial = 3;

// argv without the program name. `envp` is the initial environment block,
// handed to the live view for the preload audit. Nothing else reads it.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        std::optional<std::vector<std::string>> envp = std::nullopt);

}  // namespace hiddenscan
