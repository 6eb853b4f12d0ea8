#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace gangforge {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index runs
/// exactly once; the first exception (lowest index) is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace gangforge
