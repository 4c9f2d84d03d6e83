#pragma once
// Thread helpers with a hard determinism rule: parallel work writes into
// per-index slots (or commutative integer accumulators) and every
// floating-point reduction happens in a fixed order that does not depend on
// the thread count.  block_sum reduces in fixed 4096-element blocks so dot
// products are bitwise identical for any --threads value.

#include <cstdint>
#include <functional>

namespace rcmlab {

// Global worker count: --threads flag > RCMLAB_THREADS env > hardware.
int configured_threads();
void set_threads(int n);

// Calls fn(i) for i in [begin, end), statically chunked over workers.
void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t)>& fn);

// Calls fn(lo, hi) once per contiguous chunk (grain controls slot layout for
// per-chunk scratch; the chunk grid is fixed, independent of thread count).
void parallel_chunks(int64_t n, int64_t grain,
                     const std::function<void(int64_t, int64_t, int64_t)>& fn);

// Deterministic sum: fixed-size block partials (parallelisable per block),
// combined sequentially in block order.
double block_sum(const double* v, int64_t n);
double block_dot(const double* a, const double* b, int64_t n);

}  // namespace rcmlab
