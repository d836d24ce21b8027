#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace esd {

/// Paths are reduced in fixed blocks of this many consecutive path indices;
/// block results are merged left to right. The reduction tree therefore does
/// not depend on the number of worker threads.
inline constexpr std::size_t kPathBlock = 64;

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n). If any call throws, the exception of the
/// lowest failing index is rethrown after all workers finish.
template <class Fn>
void for_each_index(std::size_t n, unsigned threads, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Block-ordered reduction over path indices [0, n_paths).
/// path_fn(path, acc) folds one path into a block accumulator;
/// merge(into, from) combines two accumulators.
template <class Acc, class Init, class PathFn, class Merge>
Acc reduce_paths(std::size_t n_paths, unsigned threads, Init&& init, PathFn&& path_fn, Merge&& merge) {
    const std::size_t blocks = (n_paths + kPathBlock - 1) / kPathBlock;
    std::vector<Acc> partial;
    partial.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) partial.push_back(init());
    for_each_index(blocks, threads, [&](std::size_t b) {
        const std::size_t end = std::min(n_paths, (b + 1) * kPathBlock);
        for (std::size_t p = b * kPathBlock; p < end; ++p) path_fn(p, partial[b]);
    });
    if (partial.empty()) return init();
    Acc total = std::move(partial.front());
    for (std::size_t b = 1; b < blocks; ++b) merge(total, partial[b]);
    return total;
}

}  // namespace esd
