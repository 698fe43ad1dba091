#pragma once

#include <cstddef>
#include <functional>

namespace gwrdt {

/// Worker count from GWRDT_THREADS (>= 1), else the hardware concurrency.
unsigned default_threads();

/// Runs body(i) for i in [0, count) on up to `threads` workers (0 selects
/// default_threads()). Callers write into slot i of a pre-sized buffer, which
/// keeps merged output ordered by task index. The first exception thrown by a
/// task is rethrown after all workers join.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace gwrdt
