#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace churnkit {

/// Process-wide worker cap. 0 means hardware concurrency.
inline std::size_t& thread_cap() {
    static std::size_t cap = 0;
    return cap;
}

inline void set_thread_cap(std::size_t n) { thread_cap() = n; }

inline std::size_t effective_threads(std::size_t n_items) {
    std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    std::size_t cap = thread_cap() == 0 ? hw : thread_cap();
    if (cap > n_items) cap = n_items;
    return cap == 0 ? 1 : cap;
}

inline bool& in_parallel_region() {
    thread_local bool flag = false;
    return flag;
}

/// Runs fn(i) for i in [0, n). Each index writes only its own slot in the
/// caller's output, so results are independent of scheduling; the thread
/// count can change without changing any result. Nested calls run serially
/// inside their worker.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = in_parallel_region() ? 1 : effective_threads(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        in_parallel_region() = true;
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                break;
            }
        }
        in_parallel_region() = false;
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 0; t + 1 < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace churnkit
