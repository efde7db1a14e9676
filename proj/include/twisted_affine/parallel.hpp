#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace twisted_affine {

namespace detail {

inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{0};
    return cap;
}

inline bool& in_parallel_region() {
    thread_local bool flag = false;
    return flag;
}

}  // namespace detail

// 0 restores the default (environment variable, then hardware concurrency).
inline void set_max_threads(int n) { detail::thread_cap() = n < 0 ? 0 : n; }

inline int max_threads() {
    int cap = detail::thread_cap();
    if (cap > 0) return cap;
    if (const char* env = std::getenv("TWISTED_AFFINE_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for every i in [0, n). Each index is written by exactly one
// thread, so per-index results do not depend on the thread count. Nested calls
// run serially. The exception thrown for the lowest failing chunk wins.
template <class F>
void parallel_for(std::size_t n, F&& fn, std::size_t min_chunk = 16) {
    std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n / std::max<std::size_t>(min_chunk, 1));
    if (nt <= 1 || detail::in_parallel_region()) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(nt);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            detail::in_parallel_region() = true;
            std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

template <class T>
T pairwise_sum(const T* v, std::size_t n) {
    if (n <= 16) {
        T s{};
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
    return pairwise_sum(v.data(), v.size());
}

}  // namespace twisted_affine
