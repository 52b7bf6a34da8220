#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mcam {

/// Worker count used by parallel_for; 0 selects hardware_concurrency().
void set_thread_count(int n);
int thread_count();

namespace detail {
bool& in_parallel_region();
}

/// Runs fn(i) for i in [0, n). Each index must write only its own output
/// slot; results are then independent of the worker count. Nested calls run
/// serially on the calling worker.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(thread_count());
    if (n == 0) return;
    if (workers <= 1 || n == 1 || detail::in_parallel_region()) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        detail::in_parallel_region() = true;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
        detail::in_parallel_region() = false;
    };
    std::vector<std::jthread> pool;
    const std::size_t count = std::min(workers, n);
    pool.reserve(count - 1);
    for (std::size_t t = 1; t < count; ++t) pool.emplace_back(body);
    body();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace mcam
