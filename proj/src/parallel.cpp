#include "cgtex/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace cgtex {

namespace {

int default_workers() {
    if (const char* env = std::getenv("CGTEX_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int> g_workers{0};  // 0 = not initialized yet

// Lazily started pool; worker i waits for a generation bump, runs its slice,
// and signals completion. Only the submitting thread touches the job fields.
class Pool {
public:
    explicit Pool(int extra_threads) {
        for (int i = 0; i < extra_threads; ++i)
            threads_.emplace_back([this, i] { worker_loop(i + 1); });
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void run(int parts, const std::function<void(int)>& part_fn) {
        {
            std::lock_guard<std::mutex> lk(mu_);
            part_fn_ = &part_fn;
            parts_ = parts;
            pending_ = parts - 1;
            ++generation_;
        }
        cv_.notify_all();
        part_fn(0);
        if (parts > 1) {
            std::unique_lock<std::mutex> lk(mu_);
            done_cv_.wait(lk, [this] { return pending_ == 0; });
        }
        part_fn_ = nullptr;
    }

private:
    void worker_loop(int index) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(int)>* fn = nullptr;
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return generation_ != seen; });
                seen = generation_;
                if (stop_) return;
                if (index < parts_) fn = part_fn_;
            }
            if (fn) {
                (*fn)(index);
                std::lock_guard<std::mutex> lk(mu_);
                if (--pending_ == 0) done_cv_.notify_one();
            }
        }
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::vector<std::thread> threads_;
    const std::function<void(int)>* part_fn_ = nullptr;
    std::uint64_t generation_ = 0;
    int parts_ = 0;
    int pending_ = 0;
    bool stop_ = false;
};

// Sized once from the machine; set_worker_count can only narrow usage.
Pool& pool() {
    static Pool instance(default_workers() - 1);
    return instance;
}

}  // namespace

int worker_count() {
    int n = g_workers.load(std::memory_order_relaxed);
    if (n == 0) {
        n = default_workers();
        g_workers.store(n, std::memory_order_relaxed);
    }
    return n;
}

void set_worker_count(int n) {
    if (n >= 1) g_workers.store(n, std::memory_order_relaxed);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    int workers = worker_count();
    if (workers > n) workers = static_cast<int>(n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    int max_parts = default_workers();
    if (workers > max_parts) workers = max_parts;
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::int64_t chunk = (n + workers - 1) / workers;
    pool().run(workers, [&](int part) {
        std::int64_t b = part * chunk;
        std::int64_t e = b + chunk < n ? b + chunk : n;
        if (b < e) fn(b, e);
    });
}

}  // namespace cgtex
