#pragma once

namespace tabsyn {

inline constexpr const char* kVersion = "0.1.0";

// Report JSON schema version. Bump on any breaking change to report layout.
inline constexpr const char* kFormatVersion = "1";

}  // namespace tabsyn
