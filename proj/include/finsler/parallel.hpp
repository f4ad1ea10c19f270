#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace finsler {

// Static-striped parallel loop. Work items must be independent and must not
// throw (wrap bodies that can fail). Deterministic: item i always computes
// the same result regardless of the stripe layout.
template <class Fn>
void parallel_for(std::size_t count, bool enabled, Fn&& fn) {
  if (!enabled || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  unsigned workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 2;
  if (workers > count) workers = static_cast<unsigned>(count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace finsler
