#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace sigcap {

struct TaskFailure : std::runtime_error {
  TaskFailure(std::size_t index, const std::string& what)
      : std::runtime_error(what), index(index) {}
  std::size_t index;
};

/// Calls `task(i)` for i in [0, n) on up to `parallelism` threads. After the first
/// exception no new task starts; running tasks finish, then the failure is rethrown as a
/// TaskFailure carrying the lowest failing index.
void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& task);

}  // namespace sigcap
