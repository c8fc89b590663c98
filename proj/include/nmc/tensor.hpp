#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

#include "nmc/error.hpp"

namespace nmc {

// Row-major batch-by-feature matrix of doubles. The only tensor rank the
// layer stack needs; conv signals and flattened feature maps both live here.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) {
    return data[i * cols + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  std::size_t size() const { return data.size(); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Global worker count for the parallel loops below. 1 = fully sequential.
inline int& num_threads() {
  static int n = 1;
  return n;
}

inline void set_num_threads(int n) { num_threads() = n < 1 ? 1 : n; }

// Splits [0, n) into contiguous chunks, one per worker. Each index is
// processed by exactly one thread and per-index arithmetic is untouched, so
// results are bitwise identical to the sequential run.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  int workers = num_threads();
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::size_t nw = static_cast<std::size_t>(workers);
  if (nw > n) nw = n;
  std::vector<std::thread> pool;
  pool.reserve(nw);
  std::size_t chunk = (n + nw - 1) / nw;
  for (std::size_t w = 0; w < nw; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = lo + chunk < n ? lo + chunk : n;
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace nmc
