#include "pru/math.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pru/error.hpp"

namespace pru {

void Vector::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows_ * cols_) {
        std::ostringstream os;
        os << "Matrix: " << data_.size() << " values cannot fill a " << rows << "x" << cols << " matrix";
        throw ShapeError(os.str());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

std::string shape_string(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::identity: return "identity";
        case Activation::softmax: return "softmax";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& name) {
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    if (name == "softmax") return Activation::softmax;
    throw ConfigError("unknown activation '" + name + "'");
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vector affine(const Matrix& W, const Vector& x, const Vector& b) {
    if (W.cols() != x.size() || W.rows() != b.size()) {
        std::ostringstream os;
        os << "affine: W is " << shape_string(W) << ", x has length " << x.size() << ", b has length "
           << b.size();
        throw ShapeError(os.str());
    }
    Vector out(W.rows());
    kernel::affine_into(W, x, b, out);
    return out;
}

void activate_inplace(Activation a, std::span<double> v) noexcept {
    switch (a) {
        case Activation::sigmoid:
            for (double& x : v) x = sigmoid(x);
            break;
        case Activation::tanh:
            for (double& x : v) x = std::tanh(x);
            break;
        case Activation::relu:
            for (double& x : v) x = x > 0.0 ? x : 0.0;
            break;
        case Activation::identity:
            break;
        case Activation::softmax: {
            if (v.empty()) break;
            const double mx = *std::max_element(v.begin(), v.end());
            double sum = 0.0;
            for (double& x : v) {
                x = std::exp(x - mx);
                sum += x;
            }
            for (double& x : v) x /= sum;
            break;
        }
    }
}

void activation_backward_inplace(Activation a, std::span<const double> y, std::span<double> g) noexcept {
    switch (a) {
        case Activation::sigmoid:
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
            break;
        case Activation::tanh:
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
            break;
        case Activation::relu:
            // subgradient 0 at the kink
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = y[i] > 0.0 ? g[i] : 0.0;
            break;
        case Activation::identity:
            break;
        case Activation::softmax: {
            double dot = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) dot += y[i] * g[i];
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = y[i] * (g[i] - dot);
            break;
        }
    }
}

Vector apply_activation(Activation a, const Vector& v) {
    if (!all_finite(v)) throw NumericError("apply_activation(" + to_string(a) + "): non-finite input");
    if (a == Activation::softmax && v.empty()) throw ShapeError("softmax of an empty vector");
    Vector out = v;
    activate_inplace(a, out);
    return out;
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x0, double eps) {
    if (!(eps > 0.0)) throw Error("finite_diff_grad: eps must be positive");
    Vector grad(x0.size());
    Vector x = x0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        x[i] = x0[i] + eps;
        const double up = f(x);
        x[i] = x0[i] - eps;
        const double down = f(x);
        x[i] = x0[i];
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_diff_grad: non-finite function value at component " +
                               std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

namespace kernel {

void gemv_acc(const Matrix& W, std::span<const double> x, std::span<double> y) noexcept {
    const std::size_t rows = W.rows();
    const std::size_t cols = W.cols();
    const double* w = W.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] += acc;
    }
}

void affine_into(const Matrix& W, std::span<const double> x, std::span<const double> b,
                 std::span<double> y) noexcept {
    const std::size_t rows = W.rows();
    const std::size_t cols = W.cols();
    const double* w = W.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc + b[r];
    }
}

void gemv_t_acc(const Matrix& W, std::span<const double> v, std::span<double> out) noexcept {
    const std::size_t rows = W.rows();
    const std::size_t cols = W.cols();
    const double* w = W.data();
    double* o = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double vr = v[r];
        if (vr == 0.0) continue;
        const double* wr = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) o[c] += wr[c] * vr;
    }
}

void ger_acc(Matrix& G, std::span<const double> u, std::span<const double> v) noexcept {
    const std::size_t rows = G.rows();
    const std::size_t cols = G.cols();
    double* g = G.data();
    const double* vp = v.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double ur = u[r];
        if (ur == 0.0) continue;
        double* gr = g + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gr[c] += ur * vp[c];
    }
}

void add_acc(std::span<const double> x, std::span<double> y) noexcept {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
}

}  // namespace kernel

}  // namespace pru
