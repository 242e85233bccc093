#pragma once

#include <chrono>
#include <cstdint>

namespace tap {

// Monotonic milliseconds. Epoch is arbitrary; only differences are meaningful.
inline int64_t steady_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Wall-clock milliseconds since the Unix epoch. Used for display and row
// timestamps, never for latency arithmetic.
inline int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace tap
