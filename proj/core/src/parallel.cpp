#include "sarlv/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace sarlv {

namespace {

thread_local bool in_worker = false;

class Pool {
public:
    Pool() {
        int n = thread_count();
        for (int i = 0; i < n - 1; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    ~Pool() {
        {
            std::unique_lock lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    void run(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
        int nthreads = static_cast<int>(workers_.size()) + 1;
        std::int64_t chunk = (n + nthreads - 1) / nthreads;
        std::unique_lock lk(mu_);
        // Pool handles one parallel region at a time; concurrent callers queue up.
        busy_cv_.wait(lk, [this] { return !active_; });
        active_ = true;
        fn_ = &fn;
        total_ = n;
        chunk_ = chunk;
        next_ = 0;
        pending_ = 0;
        for (std::int64_t s = 0; s < n; s += chunk) ++pending_;
        cv_.notify_all();
        // The submitting thread works too.
        while (true) {
            std::int64_t s = next_;
            if (s >= total_) break;
            next_ = s + chunk_;
            lk.unlock();
            fn(s, std::min(s + chunk, n));
            lk.lock();
            --pending_;
        }
        done_cv_.wait(lk, [this] { return pending_ == 0; });
        active_ = false;
        fn_ = nullptr;
        busy_cv_.notify_one();
    }

private:
    void worker_loop() {
        in_worker = true;
        std::unique_lock lk(mu_);
        while (true) {
            cv_.wait(lk, [this] { return stop_ || (active_ && next_ < total_); });
            if (stop_) return;
            std::int64_t s = next_;
            if (s >= total_) continue;
            next_ = s + chunk_;
            auto* fn = fn_;
            std::int64_t e = std::min(s + chunk_, total_);
            lk.unlock();
            (*fn)(s, e);
            lk.lock();
            if (--pending_ == 0) done_cv_.notify_all();
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_, done_cv_, busy_cv_;
    const std::function<void(std::int64_t, std::int64_t)>* fn_ = nullptr;
    std::int64_t total_ = 0, chunk_ = 0, next_ = 0;
    int pending_ = 0;
    bool active_ = false;
    bool stop_ = false;
};

Pool& pool() {
    static Pool p;
    return p;
}

}  // namespace

int thread_count() {
    static int n = [] {
        if (const char* env = std::getenv("SARLV_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        if (hw == 0) hw = 4;
        return static_cast<int>(hw > 16 ? 16 : hw);
    }();
    return n;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    if (in_worker || thread_count() == 1 || n == 1) {
        fn(0, n);
        return;
    }
    pool().run(n, fn);
}

}  // namespace sarlv
