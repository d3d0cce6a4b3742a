#pragma once

// Loop helpers with thread-count independent results.
//
// Every reduction splits its range into fixed blocks of kBlock elements, sums
// each block serially and then folds the block partials serially in block
// order. The summation tree therefore depends only on the range length, so
// one thread and sixty-four threads produce the same bits.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace market_eq::parallel {

inline constexpr std::int64_t kBlock = 2048;

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Caps the worker count for the lifetime of the object.
class ThreadScope {
 public:
  explicit ThreadScope(int threads) : previous_(max_threads()) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
  }
  ~ThreadScope() {
#ifdef _OPENMP
    omp_set_num_threads(previous_);
#endif
  }
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  int previous_;
};

template <class Body>
void for_each(std::int64_t n, Body&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n > kBlock)
#endif
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

template <class Term>
double sum(std::int64_t n, Term&& term) {
  const std::int64_t blocks = (n + kBlock - 1) / kBlock;
  if (blocks <= 1) {
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += term(i);
    return s;
  }
  std::vector<double> partial(static_cast<std::size_t>(blocks), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::int64_t end = std::min(n, (b + 1) * kBlock);
    double s = 0.0;
    for (std::int64_t i = b * kBlock; i < end; ++i) s += term(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  double s = 0.0;
  for (double v : partial) s += v;
  return s;
}

// max is exact, so any reduction order gives the same answer.
template <class Term>
double max(std::int64_t n, Term&& term, double init = -std::numeric_limits<double>::infinity()) {
  double m = init;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(max : m) if (n > kBlock)
#endif
  for (std::int64_t i = 0; i < n; ++i) m = std::max(m, term(i));
  return m;
}

}  // namespace market_eq::parallel
