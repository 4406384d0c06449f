#pragma once

namespace fastdiff {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fastdiff
