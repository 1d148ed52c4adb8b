#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace percamp {

void set_threads(int n);
int threads();

// Runs body(begin, end) over a static partition of [0, n). Work items must be
// independent; results therefore do not depend on the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 64) {
    const std::size_t t = std::size_t(threads());
    const std::size_t chunks = std::min(t, std::max<std::size_t>(1, n / min_chunk));
    if (chunks <= 1) {
        if (n) body(std::size_t(0), n);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex mu;
    const std::size_t per = (n + chunks - 1) / chunks;
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t b = c * per, e = std::min(n, b + per);
        if (b >= e) break;
        pool.emplace_back([&, b, e] {
            try {
                body(b, e);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// Pairwise sum over fixed 256-element leaves; order is independent of threads.
double stable_sum(const double* x, std::size_t n);

inline double stable_sum(const std::vector<double>& v) { return stable_sum(v.data(), v.size()); }

}  // namespace percamp
