#pragma once

namespace coinvade {

inline constexpr const char* version = "0.1.0";

}  // namespace coinvade
