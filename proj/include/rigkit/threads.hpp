#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace rigkit::threads {

// Worker count for internal parallelism. Controlled by RIG_ANNOTATE_THREADS;
// unset, empty, or 0 means one worker per hardware thread.
inline int thread_count() {
  if (const char* env = std::getenv("RIG_ANNOTATE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(row) for every row in [0, rows) using a static partition, so the
// work each row does is independent of the worker count and results are
// bit-identical to a sequential loop.
template <typename Fn>
void parallel_rows(int rows, Fn&& fn) {
  const int workers = std::min(thread_count(), rows > 0 ? rows : 1);
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int begin = rows * w / workers;
    const int end = rows * (w + 1) / workers;
    pool.emplace_back([begin, end, &fn] {
      for (int r = begin; r < end; ++r) fn(r);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace rigkit::threads
