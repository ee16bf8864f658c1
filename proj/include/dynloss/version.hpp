#pragma once

namespace dynloss {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dynloss
