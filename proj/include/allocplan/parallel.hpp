// Deterministic parallel-for. Work items are independent and indexed; each
// writes its own slot, so results do not depend on the worker count. The
// ALLOCPLAN_THREADS environment variable caps the number of workers.

#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace allocplan {

inline std::size_t worker_count(std::size_t items) {
    std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("ALLOCPLAN_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<std::size_t>(cap) < hw) hw = static_cast<std::size_t>(cap);
    }
    return items < hw ? (items == 0 ? 1 : items) : hw;
}

/// Runs fn(i) for i in [0, count) across workers in contiguous chunks.
/// fn must only touch state owned by index i.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = worker_count(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace allocplan
