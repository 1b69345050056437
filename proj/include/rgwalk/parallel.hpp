#pragma once

#include <cstddef>
#include <functional>

namespace rgwalk {

/// Worker count: RGWALK_THREADS if set, else the configured override, else
/// hardware concurrency.
std::size_t worker_count();
void set_worker_count(std::size_t n);

/// Runs body(i) for i in [0, n). Work is split into contiguous blocks; results
/// must not depend on which worker runs a block.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace rgwalk
