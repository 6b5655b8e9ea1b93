// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic block-parallel ensembles. Work items are grouped into fixed
// blocks; workers claim blocks from a shared counter, and finished blocks are
// folded into the accumulator strictly in block order. The result therefore
// depends only on the block size and the item function, never on the number
// of workers or the schedule.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace twoi {

/// Worker count: explicit value, else $TWOI_WORKERS, else hardware threads.
inline unsigned resolve_workers(unsigned requested)
{
    if (requested > 0) return requested;
    if (const char* env = std::getenv("TWOI_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

struct BlockRunStats {
    std::uint64_t blocks_used = 0;      // blocks folded into the result
    std::uint64_t blocks_discarded = 0; // finished after the stop point
    std::uint64_t items_used = 0;
};

/// Process items [0, max_items) in blocks of `block_size`.
///
/// `work(begin, end)` returns a partial result for one block; `fold(acc, part)`
/// merges it in block order; after each fold `done(acc)` may end the run
/// early. Blocks claimed past the stop point are computed but discarded.
template <class Result, class Work, class Fold, class Done>
Result run_blocks(std::uint64_t max_items, std::uint64_t block_size, unsigned workers, Result acc, Work work,
                  Fold fold, Done done, BlockRunStats* stats = nullptr)
{
    const std::uint64_t n_blocks = block_size == 0 ? 0 : (max_items + block_size - 1) / block_size;
    std::atomic<std::uint64_t> next_block{0};
    std::atomic<bool> stop{false};
    std::mutex mtx;
    std::map<std::uint64_t, Result> pending;
    std::uint64_t next_fold = 0;
    std::uint64_t items_used = 0;
    std::uint64_t discarded = 0;
    std::exception_ptr failure;

    if (n_blocks > 0 && done(acc)) stop = true;

    auto worker = [&] {
        while (!stop.load()) {
            const std::uint64_t b = next_block.fetch_add(1);
            if (b >= n_blocks) break;
            const std::uint64_t begin = b * block_size;
            const std::uint64_t end = std::min(max_items, begin + block_size);
            std::optional<Result> part;
            try {
                part.emplace(work(begin, end));
            } catch (...) {
                std::lock_guard lock(mtx);
                if (!failure) failure = std::current_exception();
                stop = true;
                break;
            }
            std::lock_guard lock(mtx);
            if (stop.load() && b >= next_fold) {
                ++discarded;
                continue;
            }
            pending.emplace(b, std::move(*part));
            while (!stop.load()) {
                auto it = pending.find(next_fold);
                if (it == pending.end()) break;
                fold(acc, it->second);
                items_used += std::min(max_items, (next_fold + 1) * block_size) - next_fold * block_size;
                pending.erase(it);
                ++next_fold;
                if (done(acc)) stop = true;
            }
        }
    };

    const unsigned n_workers = static_cast<unsigned>(std::min<std::uint64_t>(std::max(1u, workers), std::max<std::uint64_t>(1, n_blocks)));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_workers);
        for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    discarded += pending.size();
    if (stats) *stats = {next_fold, discarded, items_used};
    return acc;
}

} // namespace twoi
