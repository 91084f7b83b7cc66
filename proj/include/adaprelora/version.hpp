#pragma once

namespace adaprelora {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace adaprelora
