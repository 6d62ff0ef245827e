#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <vector>

namespace beliefbench::num {

// Global accounting of live matrix storage. The high-water mark is what the
// constant-memory checks read, so every Mat must allocate through
// TrackingAllocator below.
struct MemoryStats {
    static std::size_t current_bytes();
    static std::size_t peak_bytes();
    static void reset_peak();
};

namespace detail {

void mem_add(std::size_t bytes);
void mem_sub(std::size_t bytes);

template <class T>
struct TrackingAllocator {
    using value_type = T;

    TrackingAllocator() noexcept = default;
    template <class U>
    TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        mem_add(n * sizeof(T));
        return std::allocator<T>{}.allocate(n);
    }
    void deallocate(T* p, std::size_t n) noexcept {
        mem_sub(n * sizeof(T));
        std::allocator<T>{}.deallocate(p, n);
    }
    template <class U>
    bool operator==(const TrackingAllocator<U>&) const noexcept {
        return true;
    }
};

}  // namespace detail

// Dense row-major matrix of doubles. Row and column vectors are 1xN / Nx1
// matrices; scalars are 1x1. This is the only numeric container in the
// project, so peak-memory numbers from MemoryStats cover all tensor state.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols);  // zero-filled

    static Mat zeros(int rows, int cols);
    static Mat full(int rows, int cols, double value);
    static Mat scalar(double value);
    static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double& at(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool all_finite() const;
    bool bitwise_equal(const Mat& o) const;

    double item() const;  // value of a 1x1 matrix

    void fill(double value);
    void add_inplace(const Mat& o);          // this += o
    void add_scaled_inplace(const Mat& o, double s);  // this += s * o
    double frobenius_norm() const;
    double max_abs() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double, detail::TrackingAllocator<double>> v_;
};

// Second singular value relative to the first, estimated by power iteration
// with deflation. Used by rank-1 structure checks.
double second_singular_ratio(const Mat& a);

}  // namespace beliefbench::num
