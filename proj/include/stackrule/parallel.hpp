#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace stackrule {

// Run fn(0..jobs-1) on up to `workers` threads. Callers write results into
// per-index slots, so outputs are identical for any worker count; the
// lowest-index exception wins so failures are deterministic too.
inline void parallel_for(std::size_t jobs, std::size_t workers,
                         const std::function<void(std::size_t)>& fn) {
    if (jobs == 0) return;
    if (workers <= 1 || jobs == 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    const std::size_t thread_count = std::min(workers, jobs);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

}  // namespace stackrule
