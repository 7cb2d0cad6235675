#include "bsdiag/likelihood.hpp"

#include "bsdiag/distributions.hpp"
#include "bsdiag/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bsdiag {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw DomainError("alpha must be positive and finite, got " + std::to_string(alpha));
}

const double kLogNormalizer = -0.5 * std::log(8.0 * std::numbers::pi);

}  // namespace

Vector Theta::packed() const {
    Vector v = beta;
    v.push_back(alpha);
    return v;
}

Theta Theta::unpack(std::span<const double> packed) {
    if (packed.empty()) throw DimensionError("Theta::unpack: empty vector");
    return {Vector(packed.begin(), packed.end() - 1), packed.back()};
}

DenseMatrix ObservedInfo::assembled() const {
    const std::size_t p = lba.size();
    DenseMatrix m(p + 1, p + 1);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) m(i, j) = lbb(i, j);
        m(i, p) = lba[i];
        m(p, i) = lba[i];
    }
    m(p, p) = laa;
    return m.symmetrized();
}

Vector Score::packed() const {
    Vector v = beta;
    v.push_back(alpha);
    return v;
}

double Score::norm_inf() const { return bsdiag::norm_inf(packed()); }

XiTable compute_xi(double alpha, std::span<const double> y, std::span<const double> mu) {
    check_alpha(alpha);
    if (y.size() != mu.size()) throw DimensionError("compute_xi: y and mu lengths differ");
    XiTable xi{Vector(y.size()), Vector(y.size())};
    const double scale = 2.0 / alpha;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - mu[i];
        if (!(std::abs(r) <= kMaxResidual))
            throw DomainError("residual too large at row " + std::to_string(i + 1) + " (|y - mu| = " +
                              std::to_string(std::abs(r)) + ")");
        xi.xi1[i] = scale * std::cosh(0.5 * r);
        xi.xi2[i] = scale * std::sinh(0.5 * r);
    }
    return xi;
}

Vector score_weights(const XiTable& xi) {
    Vector s(xi.xi1.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = xi.xi1[i] * xi.xi2[i] - xi.xi2[i] / xi.xi1[i];
    return s;
}

Vector per_obs_loglik(double alpha, std::span<const double> y, std::span<const double> mu) {
    check_alpha(alpha);
    if (y.size() != mu.size()) throw DimensionError("per_obs_loglik: y and mu lengths differ");
    Vector out(y.size());
    const double log_scale = std::log(2.0 / alpha);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - mu[i];
        if (!(std::abs(r) <= kMaxResidual))
            throw DomainError("residual too large at row " + std::to_string(i + 1));
        const double xi2 = (2.0 / alpha) * std::sinh(0.5 * r);
        out[i] = kLogNormalizer + log_scale + log_cosh(0.5 * r) - 0.5 * xi2 * xi2;
    }
    return out;
}

Vector per_obs_loglik(const Theta& theta, const ExprAST& model, const Dataset& data) {
    return per_obs_loglik(theta.alpha, data.y, mean_values(model, data, theta.beta));
}

double loglik(const Theta& theta, const ExprAST& model, const Dataset& data) {
    double total = 0.0;
    for (double l : per_obs_loglik(theta, model, data)) total += l;
    return total;
}

Score score(double alpha, const DesignBundle& design, const XiTable& xi) {
    const std::size_t n = design.mu.size();
    const std::size_t p = design.d.cols();
    const Vector s = score_weights(xi);
    Score u{Vector(p, 0.0), -static_cast<double>(n) / alpha};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < p; ++k) u.beta[k] += 0.5 * design.d(i, k) * s[i];
        u.alpha += xi.xi2[i] * xi.xi2[i] / alpha;
    }
    return u;
}

Score score(const Theta& theta, const ExprAST& model, const Dataset& data) {
    const DesignBundle design = build_design(model, data, theta.beta, RankCheck::skip);
    return score(theta.alpha, design, compute_xi(theta.alpha, data.y, design.mu));
}

DenseMatrix bracket_term(std::span<const double> s, const std::vector<DenseMatrix>& g) {
    if (s.size() != g.size())
        throw DimensionError("bracket_term: " + std::to_string(s.size()) + " weights for " +
                             std::to_string(g.size()) + " slices");
    if (g.empty()) return {};
    const std::size_t p = g.front().rows();
    DenseMatrix out(p, p);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (g[i].rows() != p || g[i].cols() != p)
            throw DimensionError("bracket_term: slice " + std::to_string(i) + " has the wrong shape");
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b) out(a, b) += s[i] * g[i](a, b);
    }
    return out.symmetrized();
}

Vector curvature_weights(double alpha, const XiTable& xi) {
    Vector v(xi.xi1.size());
    const double four_over_a2 = 4.0 / (alpha * alpha);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x1 = xi.xi1[i];
        const double x2 = xi.xi2[i];
        v[i] = -(2.0 * x2 * x2 + four_over_a2 - 1.0 + (x2 * x2) / (x1 * x1)) / 4.0;
    }
    return v;
}

Vector cross_weights(double alpha, const XiTable& xi) {
    Vector h(xi.xi1.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = -xi.xi1[i] * xi.xi2[i] / alpha;
    return h;
}

ObservedInfo observed_hessian(double alpha, const DesignBundle& design, const XiTable& xi) {
    const std::size_t n = design.mu.size();
    const std::size_t p = design.d.cols();
    const Vector v = curvature_weights(alpha, xi);
    const Vector h = cross_weights(alpha, xi);
    const Vector s = score_weights(xi);

    ObservedInfo info{DenseMatrix(p, p), Vector(p, 0.0), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < p; ++a) {
            const double da = design.d(i, a);
            for (std::size_t b = 0; b < p; ++b) info.lbb(a, b) += da * v[i] * design.d(i, b);
            info.lba[a] += da * h[i];
        }
        const double x2sq = xi.xi2[i] * xi.xi2[i];
        info.laa += 1.0 / (alpha * alpha) - 3.0 * x2sq / (alpha * alpha);
    }
    info.lbb = (info.lbb + 0.5 * bracket_term(s, design.g)).symmetrized();
    return info;
}

ObservedInfo observed_hessian(const Theta& theta, const ExprAST& model, const Dataset& data) {
    const DesignBundle design = build_design(model, data, theta.beta, RankCheck::skip);
    return observed_hessian(theta.alpha, design, compute_xi(theta.alpha, data.y, design.mu));
}

DenseMatrix cross_deriv_y(double alpha, const DesignBundle& design, const XiTable& xi) {
    const std::size_t n = design.mu.size();
    const std::size_t p = design.d.cols();
    const Vector v = curvature_weights(alpha, xi);
    const Vector h = cross_weights(alpha, xi);
    DenseMatrix out(p + 1, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < p; ++r) out(r, i) = -design.d(i, r) * v[i];
        out(p, i) = -h[i];
    }
    return out;
}

DenseMatrix cross_deriv_y(const Theta& theta, const ExprAST& model, const Dataset& data) {
    const DesignBundle design = build_design(model, data, theta.beta, RankCheck::skip);
    return cross_deriv_y(theta.alpha, design, compute_xi(theta.alpha, data.y, design.mu));
}

}  // namespace bsdiag
