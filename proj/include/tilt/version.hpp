#pragma once

namespace tilt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tilt
