#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace cmfg {

/// Worker count, capped by the CORRUPT_MFG_THREADS environment variable.
inline int worker_count() {
    unsigned hw = std::thread::hardware_concurrency();
    int n = hw ? static_cast<int>(hw) : 1;
    if (const char* env = std::getenv("CORRUPT_MFG_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1 && cap < n) n = cap;
    }
    return n;
}

/// Index-sliced parallel map. Each index writes only its own slot, so the
/// result is independent of scheduling.
template <class Fn>
void parallel_for(int n, Fn fn) {
    int nw = std::min(worker_count(), n > 0 ? n : 1);
    if (nw <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (int w = 0; w < nw; ++w)
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace cmfg
