#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace amlbench {

/// Splits [0, count) into `threads` contiguous chunks and runs
/// fn(begin, end, worker) on each. Chunk boundaries depend only on
/// (count, threads), so per-worker accumulators reduced in worker order give
/// run-to-run identical results for a fixed thread count.
template <typename Fn>
void parallel_chunks(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads <= 1) {
        fn(std::size_t{0}, count, std::size_t{0});
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        const std::size_t begin = count * w / threads;
        const std::size_t end = count * (w + 1) / threads;
        pool.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
    }
}

}  // namespace amlbench
