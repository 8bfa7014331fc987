#pragma once

namespace edgelab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace edgelab
