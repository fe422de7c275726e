// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ccnn {

/// Intra-op worker pool. Work is split into one contiguous index range per
/// worker (static partition), so every output element is computed by exactly
/// the same code path regardless of the thread count: results are bit-exact
/// for any setting of set_num_threads.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    void set_num_threads(int n) {
        std::lock_guard<std::mutex> guard(config_mutex_);
        if (n < 1) n = 1;
        shutdown_workers();
        num_threads_ = n;
        for (int i = 1; i < n; ++i) {
            workers_.emplace_back([this, i] { worker_loop(i); });
        }
    }

    int num_threads() const { return num_threads_; }

    /// Runs fn(begin, end) over [0, total) split across workers. Ranges are
    /// disjoint, deterministic functions of (total, num_threads).
    void parallel_for(long total, const std::function<void(long, long)>& fn) {
        const int n = num_threads_;
        if (n == 1 || total < 2) {
            if (total > 0) fn(0, total);
            return;
        }
        {
            std::unique_lock<std::mutex> lock(task_mutex_);
            task_fn_ = &fn;
            task_total_ = total;
            pending_ = n - 1;
            ++generation_;
        }
        task_cv_.notify_all();
        run_chunk(fn, total, 0, n);
        std::unique_lock<std::mutex> lock(task_mutex_);
        done_cv_.wait(lock, [this] { return pending_ == 0; });
        task_fn_ = nullptr;
    }

    ~ThreadPool() { shutdown_workers(); }

private:
    ThreadPool() = default;

    static void run_chunk(const std::function<void(long, long)>& fn, long total,
                          int index, int parts) {
        const long chunk = (total + parts - 1) / parts;
        const long begin = static_cast<long>(index) * chunk;
        const long end = std::min(total, begin + chunk);
        if (begin < end) fn(begin, end);
    }

    void worker_loop(int index) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(long, long)>* fn = nullptr;
            long total = 0;
            int parts = 0;
            {
                std::unique_lock<std::mutex> lock(task_mutex_);
                task_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                fn = task_fn_;
                total = task_total_;
                parts = num_threads_;
            }
            if (fn) run_chunk(*fn, total, index, parts);
            {
                std::lock_guard<std::mutex> lock(task_mutex_);
                if (--pending_ == 0) done_cv_.notify_all();
            }
        }
    }

    void shutdown_workers() {
        {
            std::lock_guard<std::mutex> lock(task_mutex_);
            stop_ = true;
        }
        task_cv_.notify_all();
        for (auto& w : workers_) w.join();
        workers_.clear();
        stop_ = false;
        generation_ = 0;
    }

    std::mutex config_mutex_;
    std::mutex task_mutex_;
    std::condition_variable task_cv_;
    std::condition_variable done_cv_;
    std::vector<std::thread> workers_;
    const std::function<void(long, long)>* task_fn_ = nullptr;
    long task_total_ = 0;
    int pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
    int num_threads_ = 1;
};

inline void set_num_threads(int n) { ThreadPool::instance().set_num_threads(n); }

inline void parallel_for(long total, const std::function<void(long, long)>& fn) {
    ThreadPool::instance().parallel_for(total, fn);
}

}  // namespace ccnn
