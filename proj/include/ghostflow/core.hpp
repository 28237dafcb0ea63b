// Core containers and small numeric helpers shared by the solver modules.

#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ghostflow {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }

// 2D array over a logical index box [i0, i0+nx) x [j0, j0+ny).
// Negative logical indices are used for reflected layers outside the domain.
template <typename T>
class Array2 {
public:
    Array2() = default;
    Array2(int nx, int ny, int i0 = 0, int j0 = 0, T init = T{})
        : nx_(nx), ny_(ny), i0_(i0), j0_(j0),
          data_(static_cast<std::size_t>(nx) * ny, init) {}

    T& operator()(int i, int j) {
        assert(contains(i, j));
        return data_[static_cast<std::size_t>(i - i0_) * ny_ + (j - j0_)];
    }
    const T& operator()(int i, int j) const {
        assert(contains(i, j));
        return data_[static_cast<std::size_t>(i - i0_) * ny_ + (j - j0_)];
    }

    bool contains(int i, int j) const {
        return i >= i0_ && i < i0_ + nx_ && j >= j0_ && j < j0_ + ny_;
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int i_begin() const { return i0_; }
    int i_end() const { return i0_ + nx_; }
    int j_begin() const { return j0_; }
    int j_end() const { return j0_ + ny_; }
    std::size_t size() const { return data_.size(); }

    void fill(T v) { data_.assign(data_.size(), v); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

private:
    int nx_ = 0, ny_ = 0, i0_ = 0, j0_ = 0;
    std::vector<T> data_;
};

using Field = Array2<double>;

// Error taxonomy: geometry failures and solver failures map to exit code 1,
// configuration problems to exit code 2.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GeometryError : SolverError {
    explicit GeometryError(const std::string& msg) : SolverError(msg) {}
};

struct ConvergenceError : SolverError {
    std::vector<double> residual_history;
    ConvergenceError(const std::string& msg, std::vector<double> history = {})
        : SolverError(msg), residual_history(std::move(history)) {}
};

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr double kLargePositive = 1e30;

inline bool nearly_equal(double a, double b, double tol) {
    return std::abs(a - b) <= tol;
}

}  // namespace ghostflow
