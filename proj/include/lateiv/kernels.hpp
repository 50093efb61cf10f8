#pragma once

// Row-parallel reductions.
//
// Rows are cut into fixed-size chunks; each chunk is reduced serially and the
// chunk partials are summed in chunk order. The result therefore depends only
// on the data, never on the number of threads, which keeps Monte Carlo runs
// reproducible under any worker count. When called from inside an enclosing
// parallel region the chunks run on the calling thread.

#include "lateiv/data.hpp"

#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lateiv {

enum class Execution { Serial, Parallel };

inline constexpr Index kChunkRows = 2048;

inline bool in_parallel_region() {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

/// Sets the OpenMP worker count (no-op without OpenMP). 0 keeps the default.
void set_worker_threads(int threads);
int worker_threads();

/// fn(begin, end, acc) accumulates rows [begin, end) into acc.
/// Acc must be copyable and support operator+=.
template <class Acc, class ChunkFn>
Acc chunked_reduce(Index n, const Acc& zero, ChunkFn&& fn, Execution exec = Execution::Parallel) {
  const Index chunks = (n + kChunkRows - 1) / kChunkRows;
  if (chunks <= 1) {
    Acc acc = zero;
    if (n > 0) fn(Index{0}, n, acc);
    return acc;
  }
  std::vector<Acc> partial(static_cast<std::size_t>(chunks), zero);
  [[maybe_unused]] const bool par = exec == Execution::Parallel && !in_parallel_region();
#pragma omp parallel for schedule(static) if (par)
  for (Index c = 0; c < chunks; ++c) {
    const Index b = c * kChunkRows;
    const Index e = std::min(n, b + kChunkRows);
    fn(b, e, partial[static_cast<std::size_t>(c)]);
  }
  Acc acc = zero;
  for (const Acc& p : partial) acc += p;
  return acc;
}

/// Value plus gradient accumulator.
struct ValueGrad {
  double value = 0.0;
  Vector grad;

  ValueGrad& operator+=(const ValueGrad& o) {
    value += o.value;
    if (grad.size() == 0) grad = o.grad;
    else if (o.grad.size() != 0) grad += o.grad;
    return *this;
  }
};

}  // namespace lateiv
