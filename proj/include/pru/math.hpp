#pragma once

// Dense 64-bit vector/matrix containers and the handful of kernels the
// recurrent cells are built from.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pru {

class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t n, double value = 0.0) : data_(n, value) {}
    Vector(std::initializer_list<double> values) : data_(values) {}
    explicit Vector(std::vector<double> values) : data_(std::move(values)) {}
    explicit Vector(std::span<const double> values) : data_(values.begin(), values.end()) {}

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    operator std::span<double>() noexcept { return data_; }
    operator std::span<const double>() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    // Resizes and zero-fills; keeps capacity so reuse across sequences does not allocate.
    void assign_zero(std::size_t n) { data_.assign(n, 0.0); }
    void fill(double value) noexcept;

    const std::vector<double>& values() const noexcept { return data_; }

    friend bool operator==(const Vector&, const Vector&) = default;

private:
    std::vector<double> data_;
};

// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }

    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    void fill(double value) noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

enum class Activation { sigmoid, tanh, relu, identity, softmax };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

double sigmoid(double x) noexcept;

// result = W x + b.  Throws ShapeError naming both shapes on mismatch.
Vector affine(const Matrix& W, const Vector& x, const Vector& b);

// Element-wise map (full-vector map for softmax).  Rejects non-finite input.
Vector apply_activation(Activation a, const Vector& v);

// In-place variant used on hot paths; no finiteness check.
void activate_inplace(Activation a, std::span<double> v) noexcept;

// Given y = a(pre) and g = dL/dy, overwrite g with dL/dpre.
void activation_backward_inplace(Activation a, std::span<const double> y, std::span<double> g) noexcept;

// Central finite differences of a scalar function.  Throws NumericError
// naming the component whose evaluation was non-finite.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x0, double eps);

bool all_finite(std::span<const double> v) noexcept;

namespace kernel {

// y += W x
void gemv_acc(const Matrix& W, std::span<const double> x, std::span<double> y) noexcept;
// y = W x + b
void affine_into(const Matrix& W, std::span<const double> x, std::span<const double> b,
                 std::span<double> y) noexcept;
// out += W^T v
void gemv_t_acc(const Matrix& W, std::span<const double> v, std::span<double> out) noexcept;
// G += u v^T
void ger_acc(Matrix& G, std::span<const double> u, std::span<const double> v) noexcept;
// y += x
void add_acc(std::span<const double> x, std::span<double> y) noexcept;

}  // namespace kernel

}  // namespace pru
