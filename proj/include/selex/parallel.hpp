#pragma once

#include <cstdint>
#include <functional>
#include <random>

namespace selex {

/// Number of workers to use. A positive `requested` wins; otherwise the
/// SELEX_THREADS environment variable (0 = auto), otherwise the hardware
/// concurrency.
int worker_count(int requested = 0);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work is handed
/// out by index, so callers that write results into slot i get output that
/// does not depend on the worker count. The first exception thrown by any
/// body is rethrown after all workers join.
void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& body);

/// Engine for an independent substream identified by (seed, stream).
std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t stream);

}  // namespace selex
