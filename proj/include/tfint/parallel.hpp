#pragma once

#include <cstddef>
#include <functional>

namespace tfint {

/// Number of worker threads used by library routines when none is given.
/// Defaults to the hardware concurrency; 0 restores that default.
void set_default_threads(unsigned n);
unsigned default_threads();

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Each index is processed exactly once; the first exception is rethrown
/// after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned threads = 0);

}  // namespace tfint
