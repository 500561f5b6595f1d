#pragma once

namespace bsde {
inline constexpr const char* kVersion = "0.1.0";
}
