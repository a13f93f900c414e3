#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace dwiboot {

inline unsigned default_thread_count() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

/// Static block partition of [0, n) over `threads` workers.
/// Each index is processed exactly once and writes to its own slot,
/// so results are identical for any worker count. The first exception
/// thrown by a worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nworkers = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    const std::size_t chunk = (n + nworkers - 1) / nworkers;
    for (std::size_t w = 0; w < nworkers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn, &error, &failed] {
            try {
                for (std::size_t i = begin; i < end; ++i) {
                    if (failed.load(std::memory_order_relaxed)) return;
                    fn(i);
                }
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace dwiboot
