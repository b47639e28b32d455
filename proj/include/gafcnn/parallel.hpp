#ifndef GAFCNN_PARALLEL_HPP
#define GAFCNN_PARALLEL_HPP

#include <cstdint>
#include <functional>

namespace gafcnn {

/// Runs fn over contiguous chunks of [0, n). Callers must only use this
/// where the result cannot depend on the chunking (disjoint writes,
/// per-index pure work); under that contract the output is identical for
/// every thread count, including 1.
void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

/// Process-wide default worker count for batch-parallel operations.
int default_threads();
void set_default_threads(int threads);

}  // namespace gafcnn

#endif
