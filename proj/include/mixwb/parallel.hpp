#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace mixwb {

inline int hardware_threads() {
    if (const char* env = std::getenv("MIXWB_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned n = std::thread::hardware_concurrency();
    return n ? static_cast<int>(n) : 1;
}

namespace detail {
inline thread_local bool inside_worker = false;
}

// Runs fn(i) for i in [0, n). Work is split into contiguous index blocks,
// one per worker, so a caller that accumulates per-index results and reduces
// them in index order gets the same answer at any thread count. Nested calls
// degrade to serial execution.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    int nthreads = hardware_threads();
    if (n == 0) return;
    if (nthreads <= 1 || n == 1 || detail::inside_worker) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(nthreads), n);
    std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            detail::inside_worker = true;
            for (std::size_t i = lo; i < hi; ++i) fn(i);
            detail::inside_worker = false;
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace mixwb
