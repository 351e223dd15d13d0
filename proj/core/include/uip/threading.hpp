#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace uip {

/// Process-wide cap on worker threads used by parallel loops.
/// Results are bit-identical for any thread count: work items write to
/// disjoint slots and reductions run sequentially afterwards.
inline std::atomic<unsigned>& max_threads_slot() {
    static std::atomic<unsigned> v{std::max(1u, std::thread::hardware_concurrency())};
    return v;
}

inline void set_max_threads(unsigned n) { max_threads_slot().store(n == 0 ? 1 : n); }
inline unsigned max_threads() { return max_threads_slot().load(); }

/// Runs fn(begin, end) over a partition of [0, n).
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned t = std::min<std::size_t>(max_threads(), n == 0 ? 1 : n);
    if (t <= 1 || n < 2) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t);
    const std::size_t chunk = (n + t - 1) / t;
    for (unsigned i = 0; i < t; ++i) {
        const std::size_t b = std::min(n, i * chunk);
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

} // namespace uip
