#include "adaprelora/logging.hpp"

#include <atomic>
#include <cstdio>

namespace adaprelora {

namespace {
std::atomic<WarnHandler> g_handler{nullptr};
}

void set_warn_handler(WarnHandler handler) { g_handler.store(handler); }

void warn(const std::string& message) {
  if (WarnHandler h = g_handler.load()) {
    h(message.c_str());
  } else {
    std::fprintf(stderr, "[adaprelora] warning: %s\n", message.c_str());
  }
}

}  // namespace adaprelora
