#pragma once

// Fork-join helper for per-worker computation between aggregation barriers.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace fednewton {

/// Thread cap from FED_NEWTON_THREADS (0 when unset or unparsable).
inline int env_thread_cap() {
  const char* v = std::getenv("FED_NEWTON_THREADS");
  if (v == nullptr) return 0;
  try {
    return std::max(0, std::stoi(v));
  } catch (...) {
    return 0;
  }
}

inline int effective_threads(int requested) {
  int t = std::max(1, requested);
  const int cap = env_thread_cap();
  if (cap > 0) t = std::min(t, cap);
  return t;
}

/// Runs fn(i) for i in [0, count) on up to `threads` threads. Each index
/// writes only its own output slot, so results do not depend on scheduling.
/// If several calls throw, the exception of the lowest index is rethrown.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(body);
    body();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fednewton
