#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace adastrat {

// Runs body(i) for i in [0, n) across hardware threads. Bodies must write to
// disjoint state; results stay deterministic because reductions happen in
// index order on the caller side.
template <typename F>
void parallel_for(std::int64_t n, F&& body) {
  if (n <= 0) return;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<std::int64_t>(std::min<std::uint64_t>(hw, n));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::int64_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace adastrat
