#include "splatsim/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace splatsim {

namespace {
std::atomic<int> g_workers{0};

int detect_workers() {
    if (const char* env = std::getenv("SPLATSIM_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}
} // namespace

int worker_count() {
    int n = g_workers.load(std::memory_order_relaxed);
    if (n <= 0) {
        n = detect_workers();
        g_workers.store(n, std::memory_order_relaxed);
    }
    return n;
}

void set_worker_count(int n) {
    g_workers.store(n >= 1 ? n : 1, std::memory_order_relaxed);
}

} // namespace splatsim
