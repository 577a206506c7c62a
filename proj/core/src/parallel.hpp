#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace rrmdp::detail {

// Runs fn(begin, end) over disjoint chunks of [0, n). threads <= 1 runs
// inline. Chunk boundaries depend only on (n, threads) and workers write
// disjoint outputs, so callers get bit-identical results for any thread
// count as long as their per-index work is independent.
inline void parallel_for(int n, int threads,
                         const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    threads = std::min(threads, n);
    if (threads <= 1) {
        fn(0, n);
        return;
    }
    const int chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        const int b = t * chunk;
        const int e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace rrmdp::detail
