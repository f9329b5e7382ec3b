#pragma once

#include <cstddef>
#include <functional>

namespace tactile {

/// Worker cap from SVAE_THREADS, defaulting to 1.
int default_threads();

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; callers write results into per-index slots so the
/// outcome does not depend on scheduling.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& body);

} // namespace tactile
