#include "sigcap/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace sigcap {

void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& task) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::optional<TaskFailure> failure;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        task(i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure || i < failure->index) failure.emplace(i, e.what());
        failed.store(true);
      }
    }
  };

  const auto threads = static_cast<std::size_t>(std::max(1, parallelism));
  if (threads == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) throw *failure;
}

}  // namespace sigcap
