#pragma once

#include <omp.h>

#include <cstddef>

namespace gawm {

// Runs fn(i) for i in [0, n). threads == 1 takes the plain serial loop;
// threads > 1 uses an OpenMP static schedule; threads <= 0 means "all
// hardware threads". Work items must be independent: callers that need
// deterministic aggregates write into per-item slots and reduce in item
// order afterwards, which makes results identical for every thread count.
template <typename Fn>
void parallel_for(int n, Fn&& fn, int threads) {
  if (threads == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  if (threads <= 0) threads = omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int i = 0; i < n; ++i) fn(i);
}

inline int hardware_threads() { return omp_get_max_threads(); }

}  // namespace gawm
