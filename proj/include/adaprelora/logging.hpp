#pragma once

#include <string>

namespace adaprelora {

using WarnHandler = void (*)(const char* message);

/// Replaces the warning sink; nullptr restores the default (stderr).
void set_warn_handler(WarnHandler handler);

void warn(const std::string& message);

}  // namespace adaprelora
