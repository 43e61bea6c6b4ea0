// Shared small types: dense real/bit matrices, contract checks, parallel_for.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mind {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Row-major dense matrix of doubles.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {
        require(r >= 0 && c >= 0, "Mat: negative shape");
    }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return v.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// Row-major dense matrix of bits (0/1).
struct BitMat {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> v;

    BitMat() = default;
    BitMat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0) {}

    std::uint8_t& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    std::uint8_t at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
};

// Runs fn(i) for i in [0, n). With workers <= 1 this is a plain loop; otherwise
// indices are dealt round-robin to a fixed number of threads so the work split
// does not depend on scheduling. Exceptions from workers are rethrown.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (workers <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    int t = std::min(workers, n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(t);
    pool.reserve(t);
    for (int w = 0; w < t; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int i = w; i < n; i += t) fn(i);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace mind
