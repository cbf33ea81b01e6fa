#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace navforge {

// Runs fn(i) for every i in [0, n) on up to `workers` threads. Work items are
// claimed dynamically but each result must be written to slot i by fn, so
// the merged output never depends on completion order. If any call throws,
// the exception of the lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t threads =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Maps every item to a result vector in input order.
template <class T, class Fn>
auto parallel_map(const std::vector<T>& items, int workers, Fn&& fn) {
  using R = decltype(fn(items.front()));
  std::vector<R> out(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) { out[i] = fn(items[i]); });
  return out;
}

}  // namespace navforge
