#pragma once

namespace fdd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fdd
