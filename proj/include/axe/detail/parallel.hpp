#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

#include "axe/types.hpp"

namespace axe::detail {

/// Run fn(i) for i in [0, n) on up to `workers` threads, in contiguous
/// blocks. fn must only touch state owned by index i. The first exception
/// thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(Index n, int workers, Fn&& fn) {
    workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<Index>(n, 1))));
    if (workers == 1) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const Index block = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                const Index begin = w * block;
                const Index end = std::min(n, begin + block);
                for (Index i = begin; i < end; ++i) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace axe::detail
