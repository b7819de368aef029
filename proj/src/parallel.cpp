#include "cvoam/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace cvoam {

namespace {
std::atomic<int> g_threads{0};  // 0 = use hardware concurrency
}

void set_num_threads(int n) { g_threads.store(n > 0 ? n : 0); }

int num_threads() {
    int n = g_threads.load();
    if (n > 0) return n;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int begin, int end, const std::function<void(int, int)>& chunk) {
    const int range = end - begin;
    if (range <= 0) return;
    const int workers = std::min(num_threads(), range);
    if (workers <= 1 || range < 2) {
        chunk(begin, end);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const int base = range / workers, extra = range % workers;
    int cursor = begin;
    for (int t = 0; t < workers; ++t) {
        const int size = base + (t < extra ? 1 : 0);
        const int lo = cursor, hi = cursor + size;
        cursor = hi;
        if (t + 1 == workers) {
            chunk(lo, hi);  // run the last chunk on this thread
        } else {
            pool.emplace_back([&chunk, lo, hi] { chunk(lo, hi); });
        }
    }
    for (auto& th : pool) th.join();
}

}  // namespace cvoam
