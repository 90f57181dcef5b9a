#pragma once

namespace bayesbench {

inline constexpr const char* kVersionString = "0.1.0";

}  // namespace bayesbench
