#pragma once

namespace qsync {

// Library version, stamped into every CSV metadata header.
inline constexpr const char* kVersion = "0.1.0";

}  // namespace qsync
