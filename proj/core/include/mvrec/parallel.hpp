#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace mvrec {

inline unsigned default_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1u : n;
}

// Runs fn(i) for i in [0, count) on up to n_threads workers using a static
// block partition. Results must be written to disjoint, caller-owned slots;
// any reduction over them happens afterwards in index order, so the outcome
// is independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t count, unsigned n_threads, Fn&& fn) {
    if (count == 0) return;
    const unsigned workers = static_cast<unsigned>(
        std::min<std::size_t>(n_threads == 0 ? default_threads() : n_threads, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace mvrec
