#include "amsrn/math_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace amsrn {

namespace detail {

std::string shape_of(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

std::string shape_of(const Vector& v) {
    return "len " + std::to_string(v.size());
}

void require_same_length(const Vector& a, const Vector& b, const char* op) {
    if (a.size() != b.size()) {
        throw ShapeError(std::string(op) + ": operand lengths differ (" +
                         shape_of(a) + " vs " + shape_of(b) + ")");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

std::uint64_t Rng::next_u64() {
    // splitmix64 (Steele, Lea, Flood 2014)
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw DomainError("Rng::below: n must be positive");
    // Rejection-free multiply-shift would bias tiny ranges negligibly, but we
    // want bit-reproducible draws, so take the straightforward modulo of a
    // fresh 64-bit word. Bias is < 2^-53 for any n used here.
    return static_cast<std::size_t>(next_u64() % static_cast<std::uint64_t>(n));
}

Rng Rng::split() {
    return Rng(next_u64());
}

// ---------------------------------------------------------------------------
// Forward ops
// ---------------------------------------------------------------------------

Vector matvec(const Matrix& m, const Vector& v) {
    if (m.cols != v.size()) {
        throw ShapeError("matvec: matrix " + detail::shape_of(m) +
                         " incompatible with vector " + detail::shape_of(v));
    }
    Vector out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += r[j] * v[j];
        out[i] = acc;
    }
    return out;
}

Vector matvec_transposed(const Matrix& m, const Vector& v) {
    if (m.rows != v.size()) {
        throw ShapeError("matvec_transposed: matrix " + detail::shape_of(m) +
                         " incompatible with vector " + detail::shape_of(v));
    }
    Vector out(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        const double vi = v[i];
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += vi * r[j];
    }
    return out;
}

void add_outer(Matrix& m, const Vector& a, const Vector& b) {
    if (m.rows != a.size() || m.cols != b.size()) {
        throw ShapeError("add_outer: matrix " + detail::shape_of(m) + " vs vectors " +
                         detail::shape_of(a) + ", " + detail::shape_of(b));
    }
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        const double ai = a[i];
        for (std::size_t j = 0; j < m.cols; ++j) r[j] += ai * b[j];
    }
}

Vector add(const Vector& a, const Vector& b) {
    detail::require_same_length(a, b, "add");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

void add_inplace(Vector& a, const Vector& b) {
    detail::require_same_length(a, b, "add_inplace");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

Vector scale(double alpha, const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = alpha * v[i];
    return out;
}

Vector axpy(double alpha, const Vector& x, const Vector& y) {
    detail::require_same_length(x, y, "axpy");
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i] + y[i];
    return out;
}

void axpy_inplace(double alpha, const Vector& x, Vector& y) {
    detail::require_same_length(x, y, "axpy_inplace");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vector hadamard(const Vector& a, const Vector& b) {
    detail::require_same_length(a, b, "hadamard");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

double dot(const Vector& a, const Vector& b) {
    detail::require_same_length(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

namespace {

double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Vector sigmoid(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid_scalar(v[i]);
    return out;
}

Vector tanh_vec(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
    return out;
}

Vector softmax(const Vector& v) {
    if (v.empty()) throw ShapeError("softmax: empty vector");
    const double m = *std::max_element(v.begin(), v.end());
    Vector out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

double log_sum_exp(const Vector& v) {
    if (v.empty()) throw ShapeError("log_sum_exp: empty vector");
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - m);
    return m + std::log(sum);
}

// ---------------------------------------------------------------------------
// Vector-Jacobian products
// ---------------------------------------------------------------------------

Vector sigmoid_vjp(const Vector& y, const Vector& dy) {
    detail::require_same_length(y, dy, "sigmoid_vjp");
    Vector out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = dy[i] * y[i] * (1.0 - y[i]);
    return out;
}

Vector tanh_vjp(const Vector& y, const Vector& dy) {
    detail::require_same_length(y, dy, "tanh_vjp");
    Vector out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = dy[i] * (1.0 - y[i] * y[i]);
    return out;
}

Vector softmax_vjp(const Vector& y, const Vector& dy) {
    detail::require_same_length(y, dy, "softmax_vjp");
    // dx_i = y_i * (dy_i - sum_j y_j dy_j)
    double inner = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) inner += y[i] * dy[i];
    Vector out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * (dy[i] - inner);
    return out;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::function<double(const Vector&)>& f,
                           const std::function<Vector(const Vector&)>& analytic_grad,
                           const Vector& theta,
                           double eps,
                           double tol) {
    if (eps <= 0.0) throw DomainError("grad_check: eps must be positive");

    GradCheckReport report;
    report.analytic = analytic_grad(theta);
    if (report.analytic.size() != theta.size()) {
        throw ShapeError("grad_check: analytic gradient " + detail::shape_of(report.analytic) +
                         " does not match theta " + detail::shape_of(theta));
    }

    report.numeric.resize(theta.size());
    report.rel_error.resize(theta.size());
    Vector probe = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + eps;
        const double f_plus = f(probe);
        probe[i] = theta[i] - eps;
        const double f_minus = f(probe);
        probe[i] = theta[i];
        if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
            throw NumericError("grad_check: non-finite function value at coordinate " +
                               std::to_string(i));
        }
        report.numeric[i] = (f_plus - f_minus) / (2.0 * eps);

        const double a = report.analytic[i];
        const double n = report.numeric[i];
        const double denom = std::max(1.0, std::abs(a) + std::abs(n));
        report.rel_error[i] = std::abs(a - n) / denom;
        report.max_rel_error = std::max(report.max_rel_error, report.rel_error[i]);
        if (report.rel_error[i] > tol) report.failures.push_back(i);
    }
    return report;
}

}  // namespace amsrn
