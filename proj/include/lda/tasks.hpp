#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lda {

// Deterministic block-parallel execution. Work is split into fixed-size
// blocks regardless of the thread count; workers pull block indices from an
// atomic counter. Callers key any randomness off the block index, so the
// result is identical for 1 or N threads.
//
// fn(block_index, begin, end) must write only to disjoint output slices.
inline void parallel_blocks(std::size_t n_items, std::size_t block_size, unsigned n_threads,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n_items == 0) return;
    block_size = std::max<std::size_t>(1, block_size);
    const std::size_t n_blocks = (n_items + block_size - 1) / block_size;
    if (n_threads == 0) n_threads = 1;
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_blocks));

    if (n_threads == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b)
            fn(b, b * block_size, std::min(n_items, (b + 1) * block_size));
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            try {
                fn(b, b * block_size, std::min(n_items, (b + 1) * block_size));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace lda
