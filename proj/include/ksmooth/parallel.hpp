#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace ksmooth {

/// Worker-pool size: KSMOOTH_WORKERS if set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t worker_count();

/// Calls body(i) for i in [0, count) on up to `workers` threads (0 = worker_count()).
/// Indices are handed out dynamically, so bodies must write results by index.
/// Calls made from inside a worker run serially on that worker.
/// The first exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, std::size_t workers = 0);

}  // namespace ksmooth
