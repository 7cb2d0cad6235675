#include "bsdiag/diagnostics.hpp"

#include "bsdiag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace bsdiag {

std::string_view scheme_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::case_weights: return "case-weights";
        case SchemeKind::response: return "response";
        case SchemeKind::explanatory: return "explanatory";
    }
    return "?";
}

std::optional<SchemeKind> parse_scheme_name(std::string_view name) {
    if (name == "case-weights") return SchemeKind::case_weights;
    if (name == "response") return SchemeKind::response;
    if (name == "explanatory") return SchemeKind::explanatory;
    return std::nullopt;
}

Vector PerturbationScheme::null_point(std::size_t n) const {
    return Vector(n, kind == SchemeKind::case_weights ? 1.0 : 0.0);
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) throw DimensionError("sample_sd: need at least two values");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

namespace {

void require_scale(double s, const char* who) {
    if (!(s > 0.0) || !std::isfinite(s))
        throw DomainError(std::string(who) + ": scale must be positive and finite");
}

void require_converged(const FitResult& fit, std::vector<std::string>& warnings) {
    if (!fit.converged) warnings.push_back("fit did not converge; Delta evaluated at the last iterate");
}

}  // namespace

DeltaMatrix delta_case_weights(const FitResult& fit) {
    const std::size_t n = fit.design_at_hat.mu.size();
    const std::size_t p = fit.design_at_hat.d.cols();
    const double alpha = fit.theta_hat.alpha;
    DeltaMatrix out{PerturbationScheme::case_weights(), DenseMatrix(p + 1, n),
                    PerturbationScheme::case_weights().null_point(n), {}};
    require_converged(fit, out.warnings);
    const auto& xi = fit.xi_at_hat;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = 0.5 * (xi.xi1[i] * xi.xi2[i] - xi.xi2[i] / xi.xi1[i]);
        const double b = -1.0 / alpha + xi.xi2[i] * xi.xi2[i] / alpha;
        for (std::size_t r = 0; r < p; ++r) out.values(r, i) = fit.design_at_hat.d(i, r) * a;
        out.values(p, i) = b;
    }
    return out;
}

DeltaMatrix delta_response(const FitResult& fit, double s_y) {
    require_scale(s_y, "delta_response");
    const std::size_t n = fit.design_at_hat.mu.size();
    const std::size_t p = fit.design_at_hat.d.cols();
    const double alpha = fit.theta_hat.alpha;
    const auto scheme = PerturbationScheme::response(s_y);
    DeltaMatrix out{scheme, DenseMatrix(p + 1, n), scheme.null_point(n), {}};
    require_converged(fit, out.warnings);
    const auto& xi = fit.xi_at_hat;
    const double four_over_a2 = 4.0 / (alpha * alpha);
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = xi.xi1[i];
        const double x2 = xi.xi2[i];
        const double c = s_y * (2.0 * x2 * x2 + four_over_a2 - 1.0 + (x2 * x2) / (x1 * x1)) / 4.0;
        const double d = s_y * x1 * x2 / alpha;
        for (std::size_t r = 0; r < p; ++r) out.values(r, i) = fit.design_at_hat.d(i, r) * c;
        out.values(p, i) = d;
    }
    return out;
}

DeltaMatrix delta_explanatory(const ExprAST& model, const Dataset& data, const FitResult& fit,
                              std::size_t j, double s_x) {
    require_scale(s_x, "delta_explanatory");
    if (j >= data.m()) throw DomainError("delta_explanatory: covariate index out of range");
    const std::size_t n = data.n();
    const std::size_t p = model.parameter_count();
    const double alpha = fit.theta_hat.alpha;
    const auto scheme = PerturbationScheme::explanatory(j, s_x);
    DeltaMatrix out{scheme, DenseMatrix(p + 1, n), scheme.null_point(n), {}};
    require_converged(fit, out.warnings);

    if (!model.references_covariate(j)) {
        out.warnings.push_back("covariate '" + data.covariate_names[j] +
                               "' does not appear in the mean function; Delta is zero");
        return out;
    }
    std::set<double> distinct;
    for (std::size_t i = 0; i < n && distinct.size() < 3; ++i) distinct.insert(data.x(i, j));
    if (distinct.size() < 3)
        out.warnings.push_back("covariate '" + data.covariate_names[j] +
                               "' takes at most two values; the scheme assumes a continuous covariate");

    const auto& xi = fit.xi_at_hat;
    const double four_over_a2 = 4.0 / (alpha * alpha);
    for (std::size_t i = 0; i < n; ++i) {
        Dual2 f;
        try {
            f = eval_dual2(model, data.x.row(i), fit.theta_hat.beta, j);
        } catch (const EvaluationError& e) {
            throw e.at_row(i);
        }
        const double x1 = xi.xi1[i];
        const double x2 = xi.xi2[i];
        const double a = 0.5 * (x1 * x2 - x2 / x1);
        const double v_neg = (2.0 * x2 * x2 + four_over_a2 - 1.0 + (x2 * x2) / (x1 * x1)) / 4.0;
        const double mu_dot = s_x * f.grad[p];
        for (std::size_t r = 0; r < p; ++r) {
            const double mu_ddot = s_x * f.hess(r, p);
            const double mu_dot_r = f.grad[r];
            out.values(r, i) = mu_ddot * a - mu_dot * mu_dot_r * v_neg;
        }
        out.values(p, i) = -mu_dot * x1 * x2 / alpha;
    }
    return out;
}

DeltaMatrix delta_for_scheme(const ExprAST& model, const Dataset& data, const FitResult& fit,
                             const PerturbationScheme& scheme) {
    switch (scheme.kind) {
        case SchemeKind::case_weights: return delta_case_weights(fit);
        case SchemeKind::response: return delta_response(fit, scheme.scale);
        case SchemeKind::explanatory:
            if (!scheme.covariate) throw DomainError("explanatory scheme needs a covariate");
            return delta_explanatory(model, data, fit, *scheme.covariate, scheme.scale);
    }
    throw DomainError("unknown perturbation scheme");
}

// --- curvatures ------------------------------------------------------------

namespace {

DenseMatrix inverse_info(const ObservedInfo& info) {
    return lu_inverse(info.assembled()).symmetrized();
}

// L^{-1} - L22, where L22 is zero except 1/L_aa in the alpha corner.
DenseMatrix inverse_info_beta(const ObservedInfo& info) {
    if (info.laa == 0.0) throw SingularError("curvature_beta: L_aa is zero", info.p());
    DenseMatrix m = inverse_info(info);
    m(info.p(), info.p()) -= 1.0 / info.laa;
    return m;
}

void check_shapes(const DeltaMatrix& delta, const ObservedInfo& info) {
    if (delta.values.rows() != info.p() + 1)
        throw DimensionError("Delta has " + std::to_string(delta.values.rows()) + " rows, expected " +
                             std::to_string(info.p() + 1));
}

// -Delta^T M Delta
DenseMatrix b_matrix(const DeltaMatrix& delta, const DenseMatrix& m) {
    const DenseMatrix md = m * delta.values;
    return (-1.0 * (delta.values.transpose() * md)).symmetrized();
}

struct TopEigen {
    double lambda = 0.0;
    Vector vector;
    std::vector<std::string> warnings;
};

TopEigen top_eigen(const DenseMatrix& b, const char* label) {
    TopEigen out;
    const SymmetricEigen eig = jacobi_sym_eig(b);
    const double tol = 1e-10 * std::max(b.frobenius_norm(), 1e-300);
    out.lambda = eig.values.front();
    out.vector = eig.vectors.column(0);
    const double nrm = norm2(out.vector);
    for (double& x : out.vector) x /= nrm;
    if (eig.values.back() < -tol)
        out.warnings.push_back(std::string(label) + " has a negative eigenvalue " +
                               std::to_string(eig.values.back()) +
                               "; the fit may not be at a local maximum");
    if (out.lambda < 0.0 && out.lambda >= -tol) out.lambda = 0.0;
    return out;
}

Vector per_case_curvature(const DeltaMatrix& delta, const DenseMatrix& m) {
    const std::size_t n = delta.values.cols();
    const DenseMatrix md = m * delta.values;
    Vector c(n);
    for (std::size_t i = 0; i < n; ++i) {
        double q = 0.0;
        for (std::size_t r = 0; r < delta.values.rows(); ++r) q += delta.values(r, i) * md(r, i);
        c[i] = 2.0 * std::abs(q);
    }
    return c;
}

}  // namespace

double normal_curvature(const DeltaMatrix& delta, const ObservedInfo& info, std::span<const double> d) {
    check_shapes(delta, info);
    if (d.size() != delta.values.cols()) throw DimensionError("normal_curvature: direction length differs");
    if (std::abs(norm2(d) - 1.0) > 1e-10) throw DomainError("normal_curvature: direction must have unit norm");
    const Vector delta_d = delta.values * d;
    const Vector m_delta_d = inverse_info(info) * delta_d;
    return 2.0 * std::abs(dot(delta_d, m_delta_d));
}

CurvatureResult max_curvature(const DeltaMatrix& delta, const ObservedInfo& info) {
    check_shapes(delta, info);
    TopEigen top = top_eigen(b_matrix(delta, inverse_info(info)), "B");
    return {2.0 * top.lambda, std::move(top.vector), std::move(top.warnings)};
}

BetaCurvature curvature_beta(const DeltaMatrix& delta, const ObservedInfo& info) {
    check_shapes(delta, info);
    if (info.p() == 0) throw DomainError("curvature_beta: model has no beta parameters");
    const DenseMatrix m = inverse_info_beta(info);
    TopEigen top = top_eigen(b_matrix(delta, m), "B1");
    return {2.0 * top.lambda, std::move(top.vector), per_case_curvature(delta, m),
            std::move(top.warnings)};
}

TotalInfluence total_local_influence(const DeltaMatrix& delta, const ObservedInfo& info) {
    check_shapes(delta, info);
    TotalInfluence out;
    out.c_i = per_case_curvature(delta, inverse_info(info));
    double mean = 0.0;
    for (double c : out.c_i) mean += c;
    mean /= static_cast<double>(std::max<std::size_t>(out.c_i.size(), 1));
    out.threshold = 2.0 * mean;
    for (std::size_t i = 0; i < out.c_i.size(); ++i)
        if (out.c_i[i] >= out.threshold) out.flagged.push_back(i);
    return out;
}

InfluenceReport influence_report(const DeltaMatrix& delta, const ObservedInfo& info) {
    InfluenceReport r;
    r.scheme = delta.scheme;
    r.warnings = delta.warnings;
    CurvatureResult full = max_curvature(delta, info);
    r.c_dmax = full.c_dmax;
    r.d_max = std::move(full.d_max);
    r.warnings.insert(r.warnings.end(), full.warnings.begin(), full.warnings.end());
    TotalInfluence total = total_local_influence(delta, info);
    r.c_i = std::move(total.c_i);
    r.threshold = total.threshold;
    r.flagged = std::move(total.flagged);
    BetaCurvature beta = curvature_beta(delta, info);
    r.c_dmax_beta = beta.c_dmax;
    r.d_max_beta = std::move(beta.d_max);
    r.c_i_beta = std::move(beta.c_i);
    r.warnings.insert(r.warnings.end(), beta.warnings.begin(), beta.warnings.end());
    return r;
}

// --- generalized leverage ------------------------------------------------

double LeverageMatrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < gl.rows(); ++i) t += gl(i, i);
    return t;
}

Vector LeverageMatrix::diagonal() const {
    Vector d(gl.rows());
    for (std::size_t i = 0; i < gl.rows(); ++i) d[i] = gl(i, i);
    return d;
}

LeverageMatrix generalized_leverage(const FitResult& fit) {
    const ObservedInfo info = observed_info_at_hat(fit);
    DenseMatrix cov;
    try {
        cov = cholesky_inverse(-1.0 * info.assembled());
    } catch (const NotPositiveDefiniteError& e) {
        throw Error(std::string("generalized_leverage: -L is not positive definite (") + e.what() + ")");
    }
    const DenseMatrix cross = cross_deriv_y(fit.theta_hat.alpha, fit.design_at_hat, fit.xi_at_hat);
    const std::size_t p = info.p();
    // Only the beta rows of (-L)^{-1} survive the product with D_theta = [D 0].
    DenseMatrix top(p, p + 1);
    for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c <= p; ++c) top(r, c) = cov(r, c);
    const DenseMatrix sens = top * cross;  // d beta_hat / dy^T, p x n
    return {fit.design_at_hat.d * sens};
}

// --- likelihood displacement ---------------------------------------------

CrossFunction perturbed_loglik(const ExprAST& model, const Dataset& data,
                               const PerturbationScheme& scheme) {
    switch (scheme.kind) {
        case SchemeKind::case_weights:
            return [&model, &data](std::span<const double> packed, std::span<const double> omega) {
                const Theta theta = Theta::unpack(packed);
                const Vector l = per_obs_loglik(theta, model, data);
                double total = 0.0;
                for (std::size_t i = 0; i < l.size(); ++i) total += omega[i] * l[i];
                return total;
            };
        case SchemeKind::response: {
            const double s = scheme.scale;
            return [&model, &data, s](std::span<const double> packed, std::span<const double> omega) {
                const Theta theta = Theta::unpack(packed);
                const Vector mu = mean_values(model, data, theta.beta);
                Vector y = data.y;
                for (std::size_t i = 0; i < y.size(); ++i) y[i] += omega[i] * s;
                double total = 0.0;
                for (double l : per_obs_loglik(theta.alpha, y, mu)) total += l;
                return total;
            };
        }
        case SchemeKind::explanatory: {
            if (!scheme.covariate) throw DomainError("explanatory scheme needs a covariate");
            const std::size_t j = *scheme.covariate;
            const double s = scheme.scale;
            return [&model, &data, j, s](std::span<const double> packed, std::span<const double> omega) {
                const Theta theta = Theta::unpack(packed);
                Vector row(data.m());
                Vector mu(data.n());
                for (std::size_t i = 0; i < data.n(); ++i) {
                    const auto xr = data.x.row(i);
                    std::copy(xr.begin(), xr.end(), row.begin());
                    row[j] += omega[i] * s;
                    mu[i] = eval_value(model, row, theta.beta);
                }
                double total = 0.0;
                for (double l : per_obs_loglik(theta.alpha, data.y, mu)) total += l;
                return total;
            };
        }
    }
    throw DomainError("unknown perturbation scheme");
}

double likelihood_displacement(const ExprAST& model, const Dataset& data, const FitResult& fit,
                               const PerturbationScheme& scheme, std::span<const double> omega) {
    if (omega.size() != data.n()) throw DimensionError("likelihood_displacement: omega length differs");
    const CrossFunction lw = perturbed_loglik(model, data, scheme);
    const Vector w(omega.begin(), omega.end());
    const ScalarFunction objective = [&lw, &w](std::span<const double> packed) { return lw(packed, w); };
    const Theta refit = refit_perturbed(objective, fit.theta_hat);
    return 2.0 * (loglik(fit.theta_hat, model, data) - loglik(refit, model, data));
}

}  // namespace bsdiag
