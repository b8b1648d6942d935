#pragma once

#include <cstdlib>
#include <thread>

namespace rm4d {

/// Worker count resolution shared by every parallel stage: an explicit
/// request wins, then the RM4D_THREADS environment variable, then all cores.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RM4D_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace rm4d
