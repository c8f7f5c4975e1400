#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

namespace bulkdiff {

inline int effective_workers(int requested) {
    const unsigned hw = std::thread::hardware_concurrency();
    int w = requested > 0 ? requested : static_cast<int>(hw ? hw : 1);
    return w < 1 ? 1 : w;
}

/// Process items [0,n) in fixed-size blocks and merge block partials in block
/// order, so the reduction result is bitwise independent of the worker count.
template <class Partial>
void ordered_block_reduce(std::size_t n, std::size_t block_size, int workers,
                          const std::function<void(std::size_t, Partial&)>& process_item,
                          const std::function<void(Partial&&)>& merge_block) {
    if (n == 0) return;
    if (block_size == 0) block_size = 64;
    const std::size_t blocks = (n + block_size - 1) / block_size;
    workers = effective_workers(workers);
    if (blocks < static_cast<std::size_t>(workers)) workers = static_cast<int>(blocks);

    if (workers <= 1) {
        for (std::size_t b = 0; b < blocks; ++b) {
            Partial part{};
            const std::size_t lo = b * block_size;
            const std::size_t hi = std::min(n, lo + block_size);
            for (std::size_t i = lo; i < hi; ++i) process_item(i, part);
            merge_block(std::move(part));
        }
        return;
    }

    std::mutex mtx;
    std::condition_variable cv;
    std::map<std::size_t, Partial> ready;
    std::size_t next_block = 0;   // next block to hand out
    std::size_t next_merge = 0;   // next block to merge
    std::exception_ptr error;

    auto worker = [&]() {
        for (;;) {
            std::size_t b;
            {
                std::lock_guard<std::mutex> lock(mtx);
                if (error || next_block >= blocks) return;
                b = next_block++;
            }
            Partial part{};
            try {
                const std::size_t lo = b * block_size;
                const std::size_t hi = std::min(n, lo + block_size);
                for (std::size_t i = lo; i < hi; ++i) process_item(i, part);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mtx);
                if (!error) error = std::current_exception();
                cv.notify_all();
                return;
            }
            {
                std::lock_guard<std::mutex> lock(mtx);
                ready.emplace(b, std::move(part));
            }
            cv.notify_all();
        }
    };

    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);

    {
        std::unique_lock<std::mutex> lock(mtx);
        while (next_merge < blocks) {
            cv.wait(lock, [&] { return error || ready.count(next_merge) > 0; });
            if (error) break;
            Partial part = std::move(ready.at(next_merge));
            ready.erase(next_merge);
            lock.unlock();
            merge_block(std::move(part));
            lock.lock();
            ++next_merge;
        }
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace bulkdiff
