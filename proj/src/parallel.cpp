#include "gafcnn/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace gafcnn {

namespace {
std::atomic<int> g_default_threads{1};
}

void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    const int workers = std::max(1, static_cast<int>(std::min<std::int64_t>(threads, n)));
    if (workers == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        const std::int64_t begin = t * chunk;
        const std::int64_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& th : pool) th.join();
}

int default_threads() { return g_default_threads.load(); }

void set_default_threads(int threads) { g_default_threads.store(std::max(1, threads)); }

}  // namespace gafcnn
