#pragma once

// Special functions, small dense linear algebra and finite-difference probes.
// Everything here is a pure function of its arguments.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace bsdiag {

using Vector = std::vector<double>;

/// Row-major dense matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, Vector data);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix diagonal(std::span<const double> d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    Vector column(std::size_t j) const;

    const Vector& data() const noexcept { return data_; }

    DenseMatrix transpose() const;
    bool all_finite() const;
    double max_abs() const;
    double frobenius_norm() const;
    /// (A + A^T)/2
    DenseMatrix symmetrized() const;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& a);
Vector operator*(const DenseMatrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);

/// Largest eigenvalue and its unit eigenvector; the largest-magnitude entry
/// of `vector` is positive.
struct EigenPair {
    double value = 0.0;
    Vector vector;
};

// --- special functions ---------------------------------------------------

double erf(double x);
/// exp(x^2) * erfc(x) for x >= 0, without overflow. Throws DomainError for x < 0.
double erfcx(double x);

// --- linear algebra ------------------------------------------------------

/// Solves A x = b for symmetric positive-definite A.
/// Throws NotPositiveDefiniteError naming the failing pivot.
Vector cholesky_solve(const DenseMatrix& a, std::span<const double> b);
/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
DenseMatrix cholesky_inverse(const DenseMatrix& a);

/// argmin ||A x - b||_2 via Householder QR. Requires rows >= cols.
/// A column whose diagonal entry in R falls below 1e-10 * ||A||_F raises SingularError.
Vector qr_least_squares(const DenseMatrix& a, std::span<const double> b);

/// Numerical column rank check used for design matrices; returns the index of
/// the first column whose R diagonal is below `rel_tol * ||A||_F`, or cols() if none.
std::size_t qr_first_deficient_column(const DenseMatrix& a, double rel_tol = 1e-10);

/// Inverse of a general square matrix by LU with partial pivoting.
DenseMatrix lu_inverse(const DenseMatrix& a);

/// All eigenpairs of a symmetric matrix by cyclic Jacobi rotations, eigenvalues
/// sorted descending; eigenvectors are columns of the returned matrix.
struct SymmetricEigen {
    Vector values;
    DenseMatrix vectors;
};
SymmetricEigen jacobi_sym_eig(const DenseMatrix& a);

/// Algebraically largest eigenpair of a symmetric matrix.
EigenPair jacobi_sym_eig_max(const DenseMatrix& a);

// --- finite differences --------------------------------------------------

using ScalarFunction = std::function<double(std::span<const double>)>;
using CrossFunction = std::function<double(std::span<const double>, std::span<const double>)>;

/// Central-difference step for coordinate value x: cbrt(eps) * max(1, |x|).
double fd_step(double x);

Vector fd_gradient(const ScalarFunction& f, std::span<const double> x);
/// Central differences extrapolated over a shrinking step sequence (Ridders),
/// keeping the entry with the smallest error estimate.
Vector fd_gradient_ridders(const ScalarFunction& f, std::span<const double> x);
DenseMatrix fd_hessian(const ScalarFunction& f, std::span<const double> x);
/// Mixed second derivatives d^2 f / d theta_r d omega_k, a (dim theta) x (dim omega) matrix.
DenseMatrix fd_cross(const CrossFunction& f, std::span<const double> theta,
                     std::span<const double> omega);

}  // namespace bsdiag
