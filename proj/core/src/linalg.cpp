#include "bsdiag/errors.hpp"
#include "bsdiag/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace bsdiag {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, Vector data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("DenseMatrix: data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("DenseMatrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Vector DenseMatrix::column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double DenseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double DenseMatrix::frobenius_norm() const { return norm2(data_); }

DenseMatrix DenseMatrix::symmetrized() const {
    if (rows_ != cols_) throw DimensionError("symmetrized: matrix is not square");
    DenseMatrix s(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) s(i, j) = 0.5 * ((*this)(i, j) + (*this)(j, i));
    return s;
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("matrix product: inner dimensions differ");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

namespace {
template <typename Op>
DenseMatrix elementwise(const DenseMatrix& a, const DenseMatrix& b, Op op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("elementwise: shapes differ");
    DenseMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = op(a(i, j), b(i, j));
    return c;
}
}  // namespace

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    return elementwise(a, b, std::plus<>{});
}
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    return elementwise(a, b, std::minus<>{});
}

DenseMatrix operator*(double s, const DenseMatrix& a) {
    DenseMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = s * a(i, j);
    return c;
}

Vector operator*(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw DimensionError("matrix-vector product: dimensions differ");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return 0.0;
    double s = 0.0;
    for (double v : a) s += (v / scale) * (v / scale);
    return scale * std::sqrt(s);
}

double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

// --- Cholesky ------------------------------------------------------------

namespace {

void require_square(const DenseMatrix& a, const char* who) {
    if (a.rows() != a.cols()) throw DimensionError(std::string(who) + ": matrix is not square");
}

void require_symmetric(const DenseMatrix& a, double rel_tol, const char* who) {
    require_square(a, who);
    const double tol = rel_tol * std::max(a.max_abs(), 1e-300);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol)
                throw DomainError(std::string(who) + ": matrix is not symmetric (entry " +
                                  std::to_string(i) + "," + std::to_string(j) + ")");
}

// Lower-triangular factor L with A = L L^T.
DenseMatrix cholesky_factor(const DenseMatrix& a) {
    require_symmetric(a, 1e-12, "cholesky");
    const std::size_t n = a.rows();
    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) {
            throw NotPositiveDefiniteError(
                "not positive definite: non-positive pivot at index " + std::to_string(j), j);
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

Vector cholesky_substitute(const DenseMatrix& l, std::span<const double> b) {
    const std::size_t n = l.rows();
    Vector y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
        y[i] /= l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) y[i] -= l(k, i) * y[k];
        y[i] /= l(i, i);
    }
    return y;
}

}  // namespace

Vector cholesky_solve(const DenseMatrix& a, std::span<const double> b) {
    if (a.rows() != b.size()) throw DimensionError("cholesky_solve: rhs length differs");
    return cholesky_substitute(cholesky_factor(a), b);
}

DenseMatrix cholesky_inverse(const DenseMatrix& a) {
    const DenseMatrix l = cholesky_factor(a);
    const std::size_t n = a.rows();
    DenseMatrix inv(n, n);
    Vector e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        const Vector col = cholesky_substitute(l, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv.symmetrized();
}

// --- Householder QR ------------------------------------------------------

namespace {

struct Householder {
    DenseMatrix qr;     // R in the upper triangle, reflectors below
    Vector beta;        // reflector scalings
    std::size_t deficient;  // first deficient column or cols
};

Householder householder_qr(const DenseMatrix& a, double rel_tol) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Householder h{a, Vector(n, 0.0), n};
    DenseMatrix& r = h.qr;
    const double threshold = rel_tol * a.frobenius_norm();
    for (std::size_t k = 0; k < n; ++k) {
        Vector v(m - k);
        for (std::size_t i = k; i < m; ++i) v[i - k] = r(i, k);
        const double alpha = norm2(v);
        if (alpha <= threshold) {
            if (h.deficient == n) h.deficient = k;
            continue;
        }
        const double sign = v[0] >= 0.0 ? 1.0 : -1.0;
        v[0] += sign * alpha;
        const double beta = 2.0 / dot(v, v);
        for (std::size_t j = k + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i) s += v[i - k] * r(i, j);
            s *= beta;
            for (std::size_t i = k; i < m; ++i) r(i, j) -= s * v[i - k];
        }
        // Store the reflector normalized to a unit leading entry.
        const double v0 = v[0];
        r(k, k) = -sign * alpha;
        for (std::size_t i = k + 1; i < m; ++i) r(i, k) = v[i - k] / v0;
        h.beta[k] = beta * v0 * v0;
    }
    return h;
}

}  // namespace

std::size_t qr_first_deficient_column(const DenseMatrix& a, double rel_tol) {
    return householder_qr(a, rel_tol).deficient;
}

Vector qr_least_squares(const DenseMatrix& a, std::span<const double> b) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (b.size() != m) throw DimensionError("qr_least_squares: rhs length differs");
    if (m < n) throw DimensionError("qr_least_squares: fewer rows than columns");
    const Householder h = householder_qr(a, 1e-10);
    if (h.deficient != n) {
        throw SingularError("singular design: column " + std::to_string(h.deficient) +
                                " is numerically dependent on earlier columns",
                            h.deficient);
    }
    // Apply Q^T to b. Reflector k is v = (1, qr(k+1..m-1, k)) with scaling beta[k].
    Vector qtb(b.begin(), b.end());
    for (std::size_t k = 0; k < n; ++k) {
        double s = qtb[k];
        for (std::size_t i = k + 1; i < m; ++i) s += h.qr(i, k) * qtb[i];
        s *= h.beta[k];
        qtb[k] -= s;
        for (std::size_t i = k + 1; i < m; ++i) qtb[i] -= s * h.qr(i, k);
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = qtb[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= h.qr(i, j) * x[j];
        x[i] = s / h.qr(i, i);
    }
    return x;
}

// --- LU ------------------------------------------------------------------

DenseMatrix lu_inverse(const DenseMatrix& a) {
    require_square(a, "lu_inverse");
    const std::size_t n = a.rows();
    DenseMatrix lu = a;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    const double tiny = 1e-14 * std::max(a.max_abs(), 1e-300);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
        if (!(std::abs(lu(piv, k)) > tiny))
            throw SingularError("singular matrix: zero pivot in column " + std::to_string(k), k);
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
            std::swap(perm[k], perm[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            lu(i, k) /= lu(k, k);
            for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= lu(i, k) * lu(k, j);
        }
    }
    DenseMatrix inv(n, n);
    Vector col(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = perm[i] == j ? 1.0 : 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < i; ++k) col[i] -= lu(i, k) * col[k];
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t k = i + 1; k < n; ++k) col[i] -= lu(i, k) * col[k];
            col[i] /= lu(i, i);
        }
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

// --- Jacobi eigensolver --------------------------------------------------

SymmetricEigen jacobi_sym_eig(const DenseMatrix& input) {
    require_symmetric(input, 1e-10, "jacobi_sym_eig");
    const std::size_t n = input.rows();
    DenseMatrix a = input.symmetrized();
    DenseMatrix v = DenseMatrix::identity(n);
    const double scale = std::max(a.frobenius_norm(), 1e-300);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (std::sqrt(off) <= 1e-15 * scale) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    SymmetricEigen out{Vector(n), DenseMatrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        out.values[k] = a(src, src);
        std::size_t big = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(v(i, src)) > std::abs(v(big, src))) big = i;
        const double sign = v(big, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = sign * v(i, src);
    }
    return out;
}

EigenPair jacobi_sym_eig_max(const DenseMatrix& a) {
    if (a.rows() == 0) throw DimensionError("jacobi_sym_eig_max: empty matrix");
    const SymmetricEigen all = jacobi_sym_eig(a);
    EigenPair top{all.values[0], all.vectors.column(0)};
    const double nrm = norm2(top.vector);
    for (double& x : top.vector) x /= nrm;
    return top;
}

}  // namespace bsdiag
