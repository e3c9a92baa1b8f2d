#pragma once

#include <cstddef>
#include <functional>

namespace semileak {

// Worker cap from SEMILEAK_THREADS (default 1, minimum 1).
int worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Work is split
// into contiguous chunks; callers write results into slot i, so output does
// not depend on the thread count. The first exception thrown is rethrown.
// Flushes subnormal floats to zero on the calling thread. Training drives
// many gradients into the subnormal range, where x86 arithmetic is an order
// of magnitude slower. Worker threads of parallel_for inherit the setting.
void enable_flush_to_zero();
bool flush_to_zero_enabled();

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace semileak
