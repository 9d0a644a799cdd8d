#include "supergraph/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace supergraph {

int thread_cap() {
  static const int cap = [] {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("SUPERGRAPH_THREADS")) {
      const int requested = std::atoi(env);
      if (requested >= 1) n = std::min(n, requested);
    }
    return n;
  }();
  return cap;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  const int workers = std::min<std::int64_t>(thread_cap(), n);
  if (workers == 1) {
    body(0, n);
    return;
  }
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const std::int64_t begin = w * chunk;
    const std::int64_t end = std::min<std::int64_t>(begin + chunk, n);
    if (begin >= end) break;
    pool.emplace_back(body, begin, end);
  }
  for (auto& t : pool) t.join();
}

}  // namespace supergraph
