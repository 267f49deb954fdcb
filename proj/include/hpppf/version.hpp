#pragma once

namespace hpppf {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hpppf
