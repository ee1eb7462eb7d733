#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <utility>

namespace splatsim {

// Worker count used by all parallel stages. Resolution order:
//   set_worker_count() > SPLATSIM_THREADS env var > hardware concurrency.
// Results are bit-reproducible for a fixed worker count; worker_count() == 1
// is the single-threaded reference mode.
int worker_count();
void set_worker_count(int n);

// Captures the first exception thrown inside a parallel region so it can be
// rethrown on the calling thread (exceptions must not escape OpenMP loops).
struct ErrorCollector {
    std::atomic<bool> failed{false};
    std::exception_ptr error;

    template <typename Fn>
    void guarded(Fn&& fn) {
        if (failed.load(std::memory_order_relaxed)) return;
        try {
            fn();
        } catch (...) {
            bool expected = false;
            if (failed.compare_exchange_strong(expected, true))
                error = std::current_exception();
        }
    }
    void rethrow() const {
        if (failed.load()) std::rethrow_exception(error);
    }
};

// Contiguous [begin, end) slice of n items owned by worker t of w.
inline std::pair<std::size_t, std::size_t> worker_range(int t, int w, std::size_t n) {
    std::size_t chunk = (n + static_cast<std::size_t>(w) - 1) / static_cast<std::size_t>(w);
    std::size_t begin = static_cast<std::size_t>(t) * chunk;
    std::size_t end = begin + chunk;
    if (begin > n) begin = n;
    if (end > n) end = n;
    return {begin, end};
}

} // namespace splatsim
