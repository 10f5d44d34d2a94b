#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace qtag {

// Fixed-point simulation time: one tick = 1e-12 time-units.  All scheduling
// and verification arithmetic happens on ticks, so "arrived at the same time"
// is an exact integer comparison rather than a floating-point one.
using Ticks = std::int64_t;

inline constexpr Ticks ticks_per_unit = 1'000'000'000'000;

inline Ticks ticks_from_units(double t) {
  return static_cast<Ticks>(std::llround(t * static_cast<double>(ticks_per_unit)));
}

inline double units_from_ticks(Ticks t) {
  return static_cast<double>(t) / static_cast<double>(ticks_per_unit);
}

// Propagation delays are quantized by rounding up: a signal may be recorded a
// tick late on the fixed-point grid but never early, so the no-faster-than-
// light invariant survives quantization.
inline Ticks delay_ticks_from_units(double dt) {
  return static_cast<Ticks>(std::ceil(dt * static_cast<double>(ticks_per_unit)));
}

inline std::string format_ticks(Ticks t) {
  return std::to_string(t);
}

}  // namespace qtag
