#include "magweyl/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace magweyl {

namespace {
std::atomic<int> g_threads{1};
}

void set_default_threads(int threads) { g_threads = std::max(1, threads); }
int default_threads() { return g_threads; }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, int threads) {
    if (threads <= 0) threads = default_threads();
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    const std::size_t block = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * block, hi = std::min(count, lo + block);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace magweyl
