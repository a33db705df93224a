#include "sparsegp/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace sparsegp {

std::size_t default_worker_count() {
  if (const char* env = std::getenv("SPARSEGP_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(count);
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), count);
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) {
      try {
        task(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < count; k = next++) {
          try {
            task(k);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace sparsegp
