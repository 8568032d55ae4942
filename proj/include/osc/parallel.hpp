#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace osc {

namespace detail {
inline int& thread_count_slot() {
    static int n = []() {
        unsigned hw = std::thread::hardware_concurrency();
        return static_cast<int>(hw == 0 ? 1 : hw);
    }();
    return n;
}
} // namespace detail

inline int thread_count() { return detail::thread_count_slot(); }

inline void set_thread_count(int n) { detail::thread_count_slot() = std::max(1, n); }

/// Runs body(i) for i in [0, n). Work items must write to disjoint state;
/// any cross-item reduction is the caller's job and must use a fixed order
/// so results do not depend on the thread count.
template <class F>
inline void parallel_for(std::size_t n, F&& body) {
    const std::size_t threads =
        std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        std::size_t lo = n * t / threads;
        std::size_t hi = n * (t + 1) / threads;
        pool.emplace_back([lo, hi, &body]() {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace osc
