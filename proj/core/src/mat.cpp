#include "beliefbench/mat.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "beliefbench/rng.hpp"

namespace beliefbench::num {

namespace {
std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};
}  // namespace

std::size_t MemoryStats::current_bytes() { return g_current.load(); }
std::size_t MemoryStats::peak_bytes() { return g_peak.load(); }
void MemoryStats::reset_peak() { g_peak.store(g_current.load()); }

void detail::mem_add(std::size_t bytes) {
    std::size_t now = g_current.fetch_add(bytes) + bytes;
    std::size_t peak = g_peak.load();
    while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
    }
}

void detail::mem_sub(std::size_t bytes) { g_current.fetch_sub(bytes); }

Mat::Mat(int rows, int cols) : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Mat: negative shape");
}

Mat Mat::zeros(int rows, int cols) { return Mat(rows, cols); }

Mat Mat::full(int rows, int cols, double value) {
    Mat m(rows, cols);
    m.fill(value);
    return m;
}

Mat Mat::scalar(double value) {
    Mat m(1, 1);
    m[0] = value;
    return m;
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    int r = static_cast<int>(rows.size());
    int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
    Mat m(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) throw std::invalid_argument("Mat::from_rows: ragged rows");
        int j = 0;
        for (double x : row) m.at(i, j++) = x;
        ++i;
    }
    return m;
}

bool Mat::all_finite() const {
    for (double x : v_)
        if (!std::isfinite(x)) return false;
    return true;
}

bool Mat::bitwise_equal(const Mat& o) const {
    if (!same_shape(o)) return false;
    return v_.empty() || std::memcmp(v_.data(), o.v_.data(), v_.size() * sizeof(double)) == 0;
}

double Mat::item() const {
    if (size() != 1) throw std::logic_error("Mat::item: not a scalar");
    return v_[0];
}

void Mat::fill(double value) {
    for (double& x : v_) x = value;
}

void Mat::add_inplace(const Mat& o) {
    if (!same_shape(o)) throw std::invalid_argument("Mat::add_inplace: shape mismatch");
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
}

void Mat::add_scaled_inplace(const Mat& o, double s) {
    if (!same_shape(o)) throw std::invalid_argument("Mat::add_scaled_inplace: shape mismatch");
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += s * o.v_[i];
}

double Mat::frobenius_norm() const {
    double s = 0.0;
    for (double x : v_) s += x * x;
    return std::sqrt(s);
}

double Mat::max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
}

namespace {

// y = G^T (G x) for the Gram matrix of a, with deflation against found
// singular directions. Power iteration on the Gram matrix gives sigma^2.
double gram_power_iter(const Mat& a, const std::vector<std::pair<std::vector<double>, double>>& found) {
    const int n = a.cols();
    std::vector<double> x(n, 0.0);
    // fixed deterministic start
    for (int i = 0; i < n; ++i) x[i] = 1.0 + 0.37 * ((i * 2654435761u) % 97);
    auto deflate = [&](std::vector<double>& v) {
        for (const auto& [dir, sig2] : found) {
            (void)sig2;
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += v[i] * dir[i];
            for (int i = 0; i < n; ++i) v[i] -= dot * dir[i];
        }
    };
    std::vector<double> ax(a.rows(), 0.0), y(n, 0.0);
    double lambda = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        deflate(x);
        double nx = 0.0;
        for (double v : x) nx += v * v;
        nx = std::sqrt(nx);
        if (nx < 1e-300) return 0.0;
        for (double& v : x) v /= nx;
        // ax = A x ; y = A^T ax
        for (int i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += a.at(i, j) * x[j];
            ax[i] = s;
        }
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < a.rows(); ++i) s += a.at(i, j) * ax[i];
            y[j] = s;
        }
        lambda = 0.0;
        for (int j = 0; j < n; ++j) lambda += x[j] * y[j];
        x = y;
    }
    return std::max(lambda, 0.0);
}

}  // namespace

double second_singular_ratio(const Mat& a) {
    if (a.rows() == 0 || a.cols() == 0) return 0.0;
    std::vector<std::pair<std::vector<double>, double>> found;
    double s1sq = gram_power_iter(a, found);
    if (s1sq <= 0.0) return 0.0;
    // recover the top right-singular direction for deflation
    const int n = a.cols();
    std::vector<double> x(n, 0.0);
    for (int i = 0; i < n; ++i) x[i] = 1.0 + 0.37 * ((i * 2654435761u) % 97);
    std::vector<double> ax(a.rows(), 0.0);
    for (int iter = 0; iter < 200; ++iter) {
        double nx = 0.0;
        for (double v : x) nx += v * v;
        nx = std::sqrt(nx);
        if (nx < 1e-300) break;
        for (double& v : x) v /= nx;
        for (int i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += a.at(i, j) * x[j];
            ax[i] = s;
        }
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < a.rows(); ++i) s += a.at(i, j) * ax[i];
            x[j] = s;
        }
    }
    double nx = 0.0;
    for (double v : x) nx += v * v;
    nx = std::sqrt(nx);
    if (nx > 1e-300)
        for (double& v : x) v /= nx;
    found.emplace_back(x, s1sq);
    double s2sq = gram_power_iter(a, found);
    return std::sqrt(std::max(s2sq, 0.0) / s1sq);
}

// ---- rng helpers ----

std::uint64_t bounded(Rng& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("bounded: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double normal(Rng& rng) {
    // Box-Muller; discard the second variate to keep call counts predictable.
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    while (u1 <= 0.0) {
        u1 = uniform01(rng);
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

Mat randn(int rows, int cols, Rng& rng, double stddev) {
    Mat m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = normal(rng) * stddev;
    return m;
}

}  // namespace beliefbench::num
