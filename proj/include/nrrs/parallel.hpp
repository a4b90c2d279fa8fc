#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace nrrs {

/// Worker count resolution order: explicit argument, NRRS_THREADS, hardware.
inline int resolve_thread_count(int requested) {
    if (requested > 0)
        return requested;
    if (const char *env = std::getenv("NRRS_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0)
            return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Static block partition of [0,n). Blocks have a fixed size independent of the
/// worker count so that any block-indexed reduction is scheduling-invariant.
constexpr std::size_t kParallelBlock = 4096;

inline std::size_t block_count(std::size_t n) {
    return (n + kParallelBlock - 1) / kParallelBlock;
}

/// Runs f(begin, end) over fixed-size blocks of [0,n). Pure per-index work only;
/// reductions belong in per-block buffers folded afterwards in block order.
template <typename F>
void parallel_for_blocks(std::size_t n, int threads, F &&f) {
    if (n == 0)
        return;
    const std::size_t blocks = block_count(n);
    if (threads <= 1 || blocks <= 1) {
        for (std::size_t b = 0; b < blocks; ++b)
            f(b, b * kParallelBlock, std::min(n, (b + 1) * kParallelBlock));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1, std::memory_order_relaxed);
            if (b >= blocks)
                return;
            f(b, b * kParallelBlock, std::min(n, (b + 1) * kParallelBlock));
        }
    };
    std::vector<std::thread> pool;
    const int spawn = static_cast<int>(std::min<std::size_t>(threads, blocks)) - 1;
    pool.reserve(spawn);
    for (int i = 0; i < spawn; ++i)
        pool.emplace_back(worker);
    worker();
    for (auto &t : pool)
        t.join();
}

/// Elementwise map over [0,n).
template <typename F>
void parallel_for(std::size_t n, int threads, F &&f) {
    parallel_for_blocks(n, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            f(i);
    });
}

} // namespace nrrs
