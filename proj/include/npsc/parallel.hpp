#pragma once

#include <cstddef>
#include <functional>

namespace npsc {

/// Worker count used by parallel_for. Defaults to hardware concurrency,
/// overridable via NPSC_THREADS or set_worker_count (CLI --threads).
int worker_count();
void set_worker_count(int n);

// Static fork-join over [begin, end). Each index is processed exactly once and
// results must be written to disjoint slots, so output is identical for every
// worker count.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& body);

}  // namespace npsc
