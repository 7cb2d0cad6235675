#include "bsdiag/errors.hpp"
#include "bsdiag/numeric.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace bsdiag {

namespace {

double checked(const ScalarFunction& f, std::span<const double> x) {
    const double v = f(x);
    if (!std::isfinite(v)) {
        throw NonFiniteError("finite difference: non-finite function value at probe point",
                             Vector(x.begin(), x.end()));
    }
    return v;
}

double checked_cross(const CrossFunction& f, std::span<const double> theta,
                     std::span<const double> omega) {
    const double v = f(theta, omega);
    if (!std::isfinite(v)) {
        Vector point(theta.begin(), theta.end());
        point.insert(point.end(), omega.begin(), omega.end());
        throw NonFiniteError("finite difference: non-finite function value at probe point",
                             std::move(point));
    }
    return v;
}

// Step rounded so that (x + h) - x == h exactly.
double representable_step(double x, double h) {
    volatile double t = x + h;
    return t - x;
}

}  // namespace

double fd_step(double x) {
    static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
    return base * std::max(1.0, std::abs(x));
}

Vector fd_gradient(const ScalarFunction& f, std::span<const double> x) {
    Vector probe(x.begin(), x.end());
    Vector g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double h = representable_step(x[j], fd_step(x[j]));
        probe[j] = x[j] + h;
        const double fp = checked(f, probe);
        probe[j] = x[j] - h;
        const double fm = checked(f, probe);
        probe[j] = x[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Vector fd_gradient_ridders(const ScalarFunction& f, std::span<const double> x) {
    constexpr int kRows = 10;
    constexpr double kShrink = 1.4;
    constexpr double kShrink2 = kShrink * kShrink;
    Vector probe(x.begin(), x.end());
    Vector g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        auto central = [&](double h) {
            h = representable_step(x[j], h);
            probe[j] = x[j] + h;
            const double up = checked(f, probe);
            probe[j] = x[j] - h;
            const double down = checked(f, probe);
            probe[j] = x[j];
            return (up - down) / (2.0 * h);
        };
        double h = 0.01 * std::max(std::abs(x[j]), 1e-2);
        std::array<std::array<double, kRows>, kRows> table{};
        table[0][0] = central(h);
        double best = table[0][0];
        double best_err = std::numeric_limits<double>::infinity();
        for (int i = 1; i < kRows; ++i) {
            h /= kShrink;
            table[0][i] = central(h);
            double factor = kShrink2;
            for (int k = 1; k <= i; ++k) {
                table[k][i] = (table[k - 1][i] * factor - table[k - 1][i - 1]) / (factor - 1.0);
                factor *= kShrink2;
                const double err = std::max(std::abs(table[k][i] - table[k - 1][i]),
                                            std::abs(table[k][i] - table[k - 1][i - 1]));
                if (err <= best_err) {
                    best_err = err;
                    best = table[k][i];
                }
            }
            if (std::abs(table[i][i] - table[i - 1][i - 1]) >= 2.0 * best_err) break;
        }
        g[j] = best;
    }
    return g;
}

DenseMatrix fd_hessian(const ScalarFunction& f, std::span<const double> x) {
    const std::size_t n = x.size();
    Vector probe(x.begin(), x.end());
    Vector h(n);
    for (std::size_t j = 0; j < n; ++j) h[j] = representable_step(x[j], fd_step(x[j]));
    const double f0 = checked(f, probe);

    DenseMatrix hess(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        probe[j] = x[j] + h[j];
        const double fp = checked(f, probe);
        probe[j] = x[j] - h[j];
        const double fm = checked(f, probe);
        probe[j] = x[j];
        hess(j, j) = (fp - 2.0 * f0 + fm) / (h[j] * h[j]);
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = j + 1; k < n; ++k) {
            auto at = [&](double sj, double sk) {
                probe[j] = x[j] + sj * h[j];
                probe[k] = x[k] + sk * h[k];
                const double v = checked(f, probe);
                probe[j] = x[j];
                probe[k] = x[k];
                return v;
            };
            const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h[j] * h[k]);
            hess(j, k) = v;
            hess(k, j) = v;
        }
    }
    return hess;
}

DenseMatrix fd_cross(const CrossFunction& f, std::span<const double> theta,
                     std::span<const double> omega) {
    Vector tp(theta.begin(), theta.end());
    Vector wp(omega.begin(), omega.end());
    DenseMatrix out(theta.size(), omega.size());
    for (std::size_t r = 0; r < theta.size(); ++r) {
        const double hr = representable_step(theta[r], fd_step(theta[r]));
        for (std::size_t k = 0; k < omega.size(); ++k) {
            const double hk = representable_step(omega[k], fd_step(omega[k]));
            auto at = [&](double sr, double sk) {
                tp[r] = theta[r] + sr * hr;
                wp[k] = omega[k] + sk * hk;
                const double v = checked_cross(f, tp, wp);
                tp[r] = theta[r];
                wp[k] = omega[k];
                return v;
            };
            out(r, k) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hr * hk);
        }
    }
    return out;
}

}  // namespace bsdiag
