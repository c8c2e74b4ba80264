#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bellhalo {

/// Thread count from an explicit request, then BELLHALO_THREADS, then the hardware.
unsigned resolve_threads(unsigned requested);

/// Calls fn(begin, end, chunk) over `chunks` contiguous slices of [0, n).
/// Chunk boundaries depend only on n and chunks, never on the thread count,
/// so per-chunk partial results can be merged in chunk order deterministically.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunks, unsigned threads, Fn&& fn) {
    chunks = std::max<std::size_t>(1, std::min(chunks, std::max<std::size_t>(n, 1)));
    auto run_chunk = [&](std::size_t c) {
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        fn(begin, end, c);
    };
    threads = std::max(1u, threads);
    if (threads == 1 || chunks == 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// fn(i) for every i in [0, n).
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    parallel_chunks(n, std::max<std::size_t>(1, threads) * 4, threads, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

}  // namespace bellhalo
