#pragma once

namespace pillarmetry {

inline constexpr const char* kToolName = "pillarmetry";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace pillarmetry
