#pragma once

namespace xmod {

inline constexpr const char* kVersion = "xmod 0.1.0";
inline constexpr int kSchemaVersion = 1;

}  // namespace xmod
