#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "amsrn/errors.hpp"

namespace amsrn {

using Vector = std::vector<double>;

// Dense row-major matrix of 64-bit reals.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vector data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double* row(std::size_t i) { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
};

// Deterministic splitmix64 stream. Same seed, same draws, on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed), seed_(seed) {}

    std::uint64_t next_u64();

    // Uniform in [0, 1), built from the top 53 bits so the mapping is exact.
    double uniform();
    double uniform(double lo, double hi);

    // Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n);

    // Derive an independent child stream; advances this stream by one draw.
    Rng split();

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t state_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Forward ops
// ---------------------------------------------------------------------------

Vector matvec(const Matrix& m, const Vector& v);

// m^T * v. Used by every backward pass that goes through a matvec.
Vector matvec_transposed(const Matrix& m, const Vector& v);

// m += a (outer) b, the matvec gradient with respect to the matrix.
void add_outer(Matrix& m, const Vector& a, const Vector& b);

Vector add(const Vector& a, const Vector& b);
void add_inplace(Vector& a, const Vector& b);
Vector scale(double alpha, const Vector& v);

// alpha * x + y
Vector axpy(double alpha, const Vector& x, const Vector& y);
void axpy_inplace(double alpha, const Vector& x, Vector& y);

Vector hadamard(const Vector& a, const Vector& b);
double dot(const Vector& a, const Vector& b);

Vector sigmoid(const Vector& v);
Vector tanh_vec(const Vector& v);

// Max-subtracted softmax. Stable for arbitrarily large finite inputs.
Vector softmax(const Vector& v);

// log(sum(exp(v))) with max subtraction; the fused loss path uses this
// instead of log(softmax(...)[y]) so probabilities never get close to log(0).
double log_sum_exp(const Vector& v);

// ---------------------------------------------------------------------------
// Vector-Jacobian products (hand-derived backward passes)
//
// Each takes the op's *output* plus the upstream gradient and returns the
// gradient with respect to the op's input.
// ---------------------------------------------------------------------------

Vector sigmoid_vjp(const Vector& y, const Vector& dy);
Vector tanh_vjp(const Vector& y, const Vector& dy);
Vector softmax_vjp(const Vector& y, const Vector& dy);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

struct GradCheckReport {
    Vector analytic;
    Vector numeric;
    Vector rel_error;                  // per coordinate
    double max_rel_error = 0.0;
    std::vector<std::size_t> failures; // coordinates whose rel_error exceeds tol

    bool ok() const { return failures.empty(); }
};

// Compares an analytic gradient against central finite differences,
// coordinate by coordinate. The relative error at coordinate i is
//   |g_analytic[i] - g_numeric[i]| / max(1, |g_analytic[i]| + |g_numeric[i]|).
// Throws NumericError if f evaluates to a non-finite value at any probe.
GradCheckReport grad_check(const std::function<double(const Vector&)>& f,
                           const std::function<Vector(const Vector&)>& analytic_grad,
                           const Vector& theta,
                           double eps = 1e-5,
                           double tol = 1e-4);

namespace detail {
std::string shape_of(const Matrix& m);
std::string shape_of(const Vector& v);
void require_same_length(const Vector& a, const Vector& b, const char* op);
}  // namespace detail

}  // namespace amsrn
