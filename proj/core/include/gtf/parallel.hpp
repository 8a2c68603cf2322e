#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace gtf {

/// Worker count: GTFCTL_WORKERS if set, otherwise hardware concurrency
/// capped at 8. Results never depend on this value: work items are
/// independent and written to pre-assigned slots.
inline int worker_count() {
    if (const char* env = std::getenv("GTFCTL_WORKERS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw > 8 ? 8 : hw);
}

/// Runs fn(i) for i in [0, n) on the configured workers. fn must only touch
/// state owned by item i.
template <class Fn>
void parallel_for(int n, Fn&& fn) {
    int workers = worker_count();
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    if (workers > n) workers = n;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&fn, w, workers, n] {
            for (int i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace gtf
