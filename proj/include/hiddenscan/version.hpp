#pragma once

namespace hiddenscan {

inline constexpr const char* kToolName = "hiddenscan";
inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace hiddenscan
