#pragma once

#include <cstddef>
#include <functional>

namespace straintc {

/// Number of worker threads used by parallel_for. Defaults to the hardware
/// concurrency; STRAINTC_THREADS overrides it.
std::size_t worker_count();

/// Runs body(i) for i in [0, count) across worker threads in contiguous
/// chunks. Each index is visited exactly once; results must be written to
/// per-index slots so output does not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t begin, std::size_t end)> &body);

} // namespace straintc
