#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace hsu {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, n). Work is chunked over `threads` std::threads;
// fn must only write to index-i state, so the result is identical for any
// thread count.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    threads = resolve_threads(threads);
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    threads = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    const int chunk = (n + threads - 1) / threads;
    auto run = [&fn](int lo, int hi) {
        for (int i = lo; i < hi; ++i) fn(i);
    };
    for (int t = 1; t < threads; ++t) {
        const int lo = t * chunk;
        if (lo >= n) break;
        pool.emplace_back(run, lo, std::min(n, lo + chunk));
    }
    run(0, std::min(n, chunk));
    for (auto& th : pool) th.join();
}

// Sum of term(i) over [0, n) in a fixed order independent of thread count:
// fixed-size blocks are accumulated (possibly in parallel) and then folded
// serially in block order.
template <typename Term>
double deterministic_sum(int n, int threads, Term&& term) {
    constexpr int kBlock = 1024;
    if (n <= 0) return 0.0;
    const int blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(blocks, 0.0);
    parallel_for(blocks, threads, [&](int b) {
        const int lo = b * kBlock;
        const int hi = std::min(n, lo + kBlock);
        double acc = 0.0;
        for (int i = lo; i < hi; ++i) acc += term(i);
        partial[b] = acc;
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

}  // namespace hsu
