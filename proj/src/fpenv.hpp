#pragma once

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace srforge {

/// Flushes subnormal floats to zero on this thread for the guard's lifetime.
///
/// Saturated sigmoids and decaying gradients drift into the subnormal range,
/// where x86 arithmetic falls back to microcode and a training step becomes
/// roughly ten times slower. No-op on other targets.
class DenormalGuard {
 public:
#if defined(__SSE2__)
  DenormalGuard() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | kFtz | kDaz); }
  ~DenormalGuard() { _mm_setcsr(saved_); }
#else
  DenormalGuard() = default;
#endif
  DenormalGuard(const DenormalGuard&) = delete;
  DenormalGuard& operator=(const DenormalGuard&) = delete;

 private:
#if defined(__SSE2__)
  static constexpr unsigned kFtz = 0x8000;  // flush results to zero
  static constexpr unsigned kDaz = 0x0040;  // treat subnormal inputs as zero
  unsigned saved_;
#endif
};

}  // namespace srforge
