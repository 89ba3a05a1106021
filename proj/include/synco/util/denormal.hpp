#pragma once

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace synco {

/// Flushes denormal floats to zero on this thread while alive. Tiny weights
/// and Adam moments otherwise push the kernels onto the slow microcode path.
class DenormalGuard {
 public:
#if defined(__SSE__)
  DenormalGuard() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }  // FTZ | DAZ
  ~DenormalGuard() { _mm_setcsr(saved_); }
#else
  DenormalGuard() = default;
#endif
  DenormalGuard(const DenormalGuard &) = delete;
  DenormalGuard &operator=(const DenormalGuard &) = delete;

 private:
#if defined(__SSE__)
  unsigned int saved_;
#endif
};

}  // namespace synco
