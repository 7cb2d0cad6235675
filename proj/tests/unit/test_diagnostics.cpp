#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace bsdiag;
using bsdiag::testing::rel_error;

namespace {

// A FitResult evaluated at an arbitrary theta, for cases no optimizer reaches.
FitResult at_theta(const ExprAST& model, const Dataset& data, const Theta& theta) {
    FitResult fit;
    fit.theta_hat = theta;
    fit.design_at_hat = build_design(model, data, theta.beta);
    fit.xi_at_hat = compute_xi(theta.alpha, data.y, fit.design_at_hat.mu);
    fit.loglik_at_hat = loglik(theta, model, data);
    fit.converged = true;
    return fit;
}

struct Fitted {
    testing::Triple t;
    FitResult fit;
    ObservedInfo info;
};

Fitted fitted(std::size_t k, std::size_t n, std::uint64_t seed) {
    testing::Triple t = testing::make_triple(k, n, seed);
    FitResult fit = fit_mle(t.model, t.data);
    ObservedInfo info = observed_info_at_hat(fit);
    return {std::move(t), std::move(fit), std::move(info)};
}

std::vector<PerturbationScheme> schemes_for(const Dataset& data) {
    std::vector<PerturbationScheme> out{PerturbationScheme::case_weights(),
                                        PerturbationScheme::response(sample_sd(data.y))};
    for (std::size_t j = 0; j < data.m(); ++j) {
        const Vector col = data.x.column(j);
        out.push_back(PerturbationScheme::explanatory(j, sample_sd(col)));
    }
    return out;
}

CrossFunction oracle_for(const testing::Triple& t, const PerturbationScheme& s) {
    return testing::oracle_perturbed(t.model, t.data, s.kind, s.covariate.value_or(0), s.scale);
}

Dataset intercept_data(const Vector& y) { return Dataset(y, {}, DenseMatrix(y.size(), 0)); }

Vector unit(std::size_t n, std::size_t i) {
    Vector e(n, 0.0);
    e[i] = 1.0;
    return e;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("scheme names round trip") {
    for (SchemeKind k : {SchemeKind::case_weights, SchemeKind::response, SchemeKind::explanatory})
        CHECK(parse_scheme_name(scheme_name(k)) == k);
    CHECK_FALSE(parse_scheme_name("weights").has_value());
    CHECK(PerturbationScheme::case_weights().null_point(3) == Vector{1, 1, 1});
    CHECK(PerturbationScheme::response(1.0).null_point(2) == Vector{0, 0});
}

TEST_CASE("sample_sd uses the n - 1 divisor") {
    CHECK(sample_sd(Vector{1.0, 2.0, 3.0, 4.0}) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
    CHECK_THROWS_AS(sample_sd(Vector{1.0}), DimensionError);
}

TEST_CASE("case-weight Delta on the symmetric two-point sample") {
    const Dataset data = intercept_data(Vector{-1.0, 1.0});
    const ExprAST model = parse_model("b1", {}, 1);
    const FitResult fit = fit_mle(model, data);
    REQUIRE(fit.converged);
    CHECK(fit.theta_hat.beta[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(fit.theta_hat.alpha == doctest::Approx(2.0 * std::sinh(0.5)).epsilon(1e-10));

    const DeltaMatrix delta = delta_case_weights(fit);
    REQUIRE(delta.values.rows() == 2);
    REQUIRE(delta.values.cols() == 2);
    const double a = (1.0 / std::tanh(0.5) - std::tanh(0.5)) / 2.0;
    CHECK(delta.values(0, 0) == doctest::Approx(-a).epsilon(1e-9));
    CHECK(delta.values(0, 1) == doctest::Approx(a).epsilon(1e-9));
    CHECK(std::abs(delta.values(1, 0)) <= 1e-9);
    CHECK(std::abs(delta.values(1, 1)) <= 1e-9);
    CHECK(delta.omega0 == Vector{1.0, 1.0});
    CHECK(delta.warnings.empty());
}

TEST_CASE("Delta vanishes in the beta rows when every residual is zero") {
    const Dataset data = intercept_data(Vector{0.4, 0.4, 0.4});
    const ExprAST model = parse_model("b1", {}, 1);
    const FitResult fit = at_theta(model, data, Theta{{0.4}, 0.7});
    const DeltaMatrix cw = delta_case_weights(fit);
    for (std::size_t i = 0; i < 3; ++i) CHECK(cw.values(0, i) == 0.0);

    const double s_y = 1.3;
    const DeltaMatrix resp = delta_response(fit, s_y);
    const double alpha = 0.7;
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(resp.values(0, i) == doctest::Approx(s_y * (4.0 / (alpha * alpha) - 1.0) / 4.0).epsilon(1e-14));
        CHECK(resp.values(1, i) == 0.0);
    }
}

TEST_CASE("case-weight columns are the per-observation score contributions") {
    for (std::size_t k = 0; k < testing::triple_models().size(); ++k) {
        const Fitted f = fitted(k, 30, 900 + k);
        const DeltaMatrix delta = delta_case_weights(f.fit);
        for (std::size_t i = 0; i < f.t.data.n(); ++i) {
            const ScalarFunction li = [&](std::span<const double> packed) {
                const Theta th = Theta::unpack(packed);
                return per_obs_loglik(th, f.t.model, f.t.data)[i];
            };
            const Vector fd = fd_gradient(li, f.fit.theta_hat.packed());
            const Vector col = delta.values.column(i);
            CHECK_MESSAGE(rel_error(col, fd) <= 1e-6, f.t.text << " row " << i);
        }
    }
}

TEST_CASE("case-weight columns sum to zero at the fit") {
    for (std::size_t k = 0; k < testing::triple_models().size(); ++k)
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const Fitted f = fitted(k, 30, 950 + 10 * k + seed);
            REQUIRE(f.fit.converged);
            const DeltaMatrix delta = delta_case_weights(f.fit);
            double col_norm = 0.0;
            for (std::size_t i = 0; i < delta.values.cols(); ++i)
                col_norm = std::max(col_norm, norm2(delta.values.column(i)));
            for (std::size_t r = 0; r < delta.values.rows(); ++r) {
                double sum = 0.0;
                for (std::size_t i = 0; i < delta.values.cols(); ++i) sum += delta.values(r, i);
                CHECK_MESSAGE(std::abs(sum) <= 1e-6 * col_norm, f.t.text);
            }
        }
}

TEST_CASE("response Delta is S_y times the y cross-derivative") {
    for (std::size_t k = 0; k < testing::triple_models().size(); ++k) {
        const Fitted f = fitted(k, 30, 1000 + k);
        const double s_y = sample_sd(f.t.data.y);
        const DeltaMatrix delta = delta_response(f.fit, s_y);
        const DenseMatrix cross = s_y * cross_deriv_y(f.fit.theta_hat, f.t.model, f.t.data);
        CHECK_MESSAGE(rel_error(delta.values, cross) <= 1e-12, f.t.text);
        CHECK(delta.omega0 == Vector(f.t.data.n(), 0.0));
    }
    CHECK_THROWS_AS(delta_response(fitted(0, 30, 1).fit, 0.0), DomainError);
}

TEST_CASE("response Delta matches per-row finite differences") {
    // y_k enters only the k-th term, so each column is differenced on that term alone
    for (std::size_t k = 0; k < testing::triple_models().size(); ++k) {
        const Fitted f = fitted(k, 30, 1100 + k);
        const double s_y = sample_sd(f.t.data.y);
        const DeltaMatrix delta = delta_response(f.fit, s_y);
        DenseMatrix fd(delta.values.rows(), delta.values.cols());
        for (std::size_t row = 0; row < f.t.data.n(); ++row) {
            DenseMatrix xrow(1, f.t.data.m());
            for (std::size_t j = 0; j < f.t.data.m(); ++j) xrow(0, j) = f.t.data.x(row, j);
            const Dataset single(Vector{f.t.data.y[row]}, f.t.data.covariate_names, xrow);
            const CrossFunction term = testing::oracle_perturbed(f.t.model, single, SchemeKind::response, 0, s_y);
            const DenseMatrix col = fd_cross(term, f.fit.theta_hat.packed(), Vector{0.0});
            for (std::size_t r = 0; r < col.rows(); ++r) fd(r, row) = col(r, 0);
        }
        CHECK_MESSAGE(rel_error(delta.values, fd) <= 1e-5, f.t.text);
    }
}

TEST_CASE("every scheme's Delta matches finite differences of its perturbed likelihood") {
    for (std::size_t k = 0; k < 21; ++k) {
        const Fitted f = fitted(k, 30, 1200 + k);
        for (const PerturbationScheme& s : schemes_for(f.t.data)) {
            if (s.kind == SchemeKind::explanatory && !f.t.model.references_covariate(*s.covariate)) continue;
            const DeltaMatrix delta = delta_for_scheme(f.t.model, f.t.data, f.fit, s);
            const DenseMatrix fd = fd_cross(oracle_for(f.t, s), f.fit.theta_hat.packed(), s.null_point(f.t.data.n()));
            CHECK_MESSAGE(rel_error(delta.values, fd) <= 1e-4, f.t.text << " " << scheme_name(s.kind));
        }
    }
}

TEST_CASE("explanatory Delta for a nonlinear mean") {
    const Dataset data = testing::simulate("b1*exp(b2*x1)", {{"x1", 0.5, 3.0}}, Vector{2.0, 0.5}, 0.4, 40, 77);
    const ExprAST model = parse_model("b1*exp(b2*x1)", data.covariate_names, 2);
    const FitResult fit = fit_mle(model, data);
    const double s_x = sample_sd(data.x.column(0));
    const DeltaMatrix delta = delta_explanatory(model, data, fit, 0, s_x);
    const CrossFunction f = testing::oracle_perturbed(model, data, SchemeKind::explanatory, 0, s_x);
    const DenseMatrix fd = fd_cross(f, fit.theta_hat.packed(), Vector(data.n(), 0.0));
    CHECK(rel_error(delta.values, fd) <= 1e-4);
    CHECK(delta.warnings.empty());
}

TEST_CASE("explanatory Delta reduces to the linear closed form") {
    const Dataset data = testing::simulate("b1 + b2*x1 + b3*x2", {{"x1", 0.0, 3.0}, {"x2", -1.0, 1.0}},
                                           Vector{0.5, 1.0, -1.0}, 0.6, 40, 78);
    const ExprAST model = parse_model("b1 + b2*x1 + b3*x2", data.covariate_names, 3);
    const FitResult fit = fit_mle(model, data);
    DenseMatrix design(data.n(), 3);
    for (std::size_t i = 0; i < data.n(); ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = data.x(i, 0);
        design(i, 2) = data.x(i, 1);
    }
    const testing::LinearForms lin(design, data.y, fit.theta_hat.beta, fit.theta_hat.alpha);
    for (std::size_t j = 0; j < 2; ++j) {
        const double s_x = sample_sd(data.x.column(j));
        const DeltaMatrix delta = delta_explanatory(model, data, fit, j, s_x);
        CHECK(rel_error(delta.values, lin.delta_explanatory(j + 1, fit.theta_hat.beta[j + 1], s_x)) <= 1e-12);
    }

    // alpha row for "b1 + b2*x1": -S_x b2 xi1 xi2 / alpha
    const Dataset simple = testing::simulate("b1 + b2*x1", {{"x1", 0.0, 2.0}}, Vector{1.0, 2.0}, 0.5, 25, 79);
    const ExprAST m2 = parse_model("b1 + b2*x1", simple.covariate_names, 2);
    const FitResult f2 = fit_mle(m2, simple);
    const DeltaMatrix d2 = delta_explanatory(m2, simple, f2, 0, 0.7);
    for (std::size_t i = 0; i < simple.n(); ++i) {
        const double e =
            -0.7 * f2.theta_hat.beta[1] * f2.xi_at_hat.xi1[i] * f2.xi_at_hat.xi2[i] / f2.theta_hat.alpha;
        CHECK(d2.values(2, i) == doctest::Approx(e).epsilon(1e-13).scale(1e-12));
    }
}

TEST_CASE("explanatory Delta is zero with a warning for an absent covariate") {
    const Dataset data = testing::simulate("b1 + b2*x1", {{"x1", 0.0, 2.0}, {"x2", 0.0, 1.0}}, Vector{1.0, 2.0},
                                           0.5, 20, 80);
    const ExprAST model = parse_model("b1 + b2*x1", data.covariate_names, 2);
    const FitResult fit = fit_mle(model, data);
    const DeltaMatrix delta = delta_explanatory(model, data, fit, 1, 1.0);
    CHECK(delta.values.max_abs() == 0.0);
    REQUIRE(delta.warnings.size() == 1);
    CHECK(delta.warnings[0].find("x2") != std::string::npos);
    CHECK_THROWS_AS(delta_explanatory(model, data, fit, 2, 1.0), DomainError);
    CHECK_THROWS_AS(delta_explanatory(model, data, fit, 0, -1.0), DomainError);
    CHECK_THROWS_AS(delta_for_scheme(model, data, fit, {SchemeKind::explanatory, std::nullopt, 1.0}), DomainError);
}

TEST_CASE("explanatory perturbation of a repeated covariate differentiates every occurrence") {
    const Dataset data =
        testing::simulate("b1 + b2*x1 + b3*x1^2", {{"x1", 0.0, 2.0}}, Vector{1.0, 0.5, -0.3}, 0.5, 30, 81);
    const ExprAST model = parse_model("b1 + b2*x1 + b3*x1^2", data.covariate_names, 3);
    const FitResult fit = fit_mle(model, data);
    const DeltaMatrix delta = delta_explanatory(model, data, fit, 0, 0.9);
    const CrossFunction f = testing::oracle_perturbed(model, data, SchemeKind::explanatory, 0, 0.9);
    CHECK(rel_error(delta.values, fd_cross(f, fit.theta_hat.packed(), Vector(data.n(), 0.0))) <= 1e-4);
}

TEST_CASE("linear fits reproduce the closed-form Delta and observed matrix") {
    const Dataset data = testing::simulate("b1 + b2*x1", {{"x1", 0.0, 4.0}}, Vector{1.0, 2.0}, 0.5, 35, 82);
    const ExprAST model = parse_model("b1 + b2*x1", data.covariate_names, 2);
    const FitResult fit = fit_mle(model, data);
    DenseMatrix design(data.n(), 2);
    for (std::size_t i = 0; i < data.n(); ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = data.x(i, 0);
    }
    const testing::LinearForms lin(design, data.y, fit.theta_hat.beta, fit.theta_hat.alpha);
    CHECK(rel_error(delta_case_weights(fit).values, lin.delta_case_weights()) <= 1e-12);
    CHECK(rel_error(delta_response(fit, 0.8).values, lin.delta_response(0.8)) <= 1e-12);
    CHECK(rel_error(observed_info_at_hat(fit).assembled(), lin.hessian()) <= 1e-12);
}

TEST_CASE("normal curvature examples") {
    const Fitted f = fitted(3, 30, 1300);
    const DeltaMatrix delta = delta_case_weights(f.fit);
    const std::size_t n = f.t.data.n();

    DeltaMatrix zero = delta;
    zero.values = DenseMatrix(delta.values.rows(), n);
    Rng rng(5);
    const Vector d = testing::random_unit(rng, n);
    CHECK(normal_curvature(zero, f.info, d) == 0.0);

    const CurvatureResult top = max_curvature(delta, f.info);
    CHECK(norm2(top.d_max) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(normal_curvature(delta, f.info, top.d_max) == doctest::Approx(top.c_dmax).epsilon(1e-10));

    Vector neg = d;
    for (double& x : neg) x = -x;
    CHECK(normal_curvature(delta, f.info, d) == normal_curvature(delta, f.info, neg));

    Vector not_unit = d;
    not_unit[0] += 1e-3;
    CHECK_THROWS_AS(normal_curvature(delta, f.info, not_unit), DomainError);
    CHECK_THROWS_AS(normal_curvature(delta, f.info, Vector(n + 1, 0.0)), DimensionError);
}

TEST_CASE("C_dmax bounds the curvature in every direction") {
    for (std::size_t k = 0; k < testing::triple_models().size(); ++k) {
        const Fitted f = fitted(k, 30, 1400 + k);
        Rng rng(1400 + k);
        for (const PerturbationScheme& s : schemes_for(f.t.data)) {
            const DeltaMatrix delta = delta_for_scheme(f.t.model, f.t.data, f.fit, s);
            const CurvatureResult top = max_curvature(delta, f.info);
            CHECK(top.c_dmax >= 0.0);
            for (int rep = 0; rep < 100; ++rep) {
                const Vector d = testing::random_unit(rng, f.t.data.n());
                CHECK(normal_curvature(delta, f.info, d) <= top.c_dmax + 1e-10);
            }
        }
    }
}

TEST_CASE("B and B1 are symmetric positive semidefinite at a fit") {
    for (std::size_t k = 0; k < testing::triple_models().size(); ++k) {
        const Fitted f = fitted(k, 30, 1500 + k);
        const DenseMatrix l = f.info.assembled();
        DenseMatrix ident = DenseMatrix::identity(l.rows());
        const DenseMatrix l_inv = testing::gauss_solve(l, ident);
        const DenseMatrix l_beta = testing::beta_subset_inverse(l);
        for (const PerturbationScheme& s : schemes_for(f.t.data)) {
            const DeltaMatrix delta = delta_for_scheme(f.t.model, f.t.data, f.fit, s);
            for (const DenseMatrix* m : {&l_inv, &l_beta}) {
                const DenseMatrix b = -1.0 * (delta.values.transpose() * (*m) * delta.values);
                CHECK(rel_error(b, b.transpose()) <= 1e-10);
                const SymmetricEigen eig = jacobi_sym_eig(b.symmetrized());
                CHECK_MESSAGE(eig.values.back() >= -1e-8 * std::max(1.0, b.frobenius_norm()), f.t.text);
            }
            CHECK(max_curvature(delta, f.info).warnings.empty());
            CHECK(curvature_beta(delta, f.info).warnings.empty());
        }
    }
}

TEST_CASE("max_curvature with a single observation") {
    const Dataset data = intercept_data(Vector{0.5});
    const ExprAST model = parse_model("b1", {}, 1);
    const FitResult fit = at_theta(model, data, Theta{{0.5}, 0.8});
    const ObservedInfo info = observed_hessian(fit.theta_hat, model, data);
    const DeltaMatrix delta = delta_response(fit, 1.0);
    const CurvatureResult top = max_curvature(delta, info);
    REQUIRE(top.d_max.size() == 1);
    CHECK(std::abs(top.d_max[0]) == 1.0);
    const DenseMatrix l = info.assembled();
    const DenseMatrix sol = testing::gauss_solve(l, delta.values);
    double q = 0.0;
    for (std::size_t r = 0; r < 2; ++r) q += delta.values(r, 0) * sol(r, 0);
    CHECK(top.c_dmax == doctest::Approx(2.0 * std::abs(q)).epsilon(1e-12));
}

TEST_CASE("duplicate observations share their influence") {
    testing::Triple t = testing::make_triple(3, 29, 1600);
    // append a copy of row 4
    DenseMatrix x(t.data.n() + 1, t.data.m());
    Vector y = t.data.y;
    for (std::size_t i = 0; i < t.data.n(); ++i)
        for (std::size_t j = 0; j < t.data.m(); ++j) x(i, j) = t.data.x(i, j);
    for (std::size_t j = 0; j < t.data.m(); ++j) x(t.data.n(), j) = t.data.x(4, j);
    y.push_back(t.data.y[4]);
    const Dataset data(y, t.data.covariate_names, x);
    const FitResult fit = fit_mle(t.model, data);
    const ObservedInfo info = observed_info_at_hat(fit);
    const std::size_t dup = data.n() - 1;
    for (const PerturbationScheme& s : schemes_for(data)) {
        const DeltaMatrix delta = delta_for_scheme(t.model, data, fit, s);
        const InfluenceReport r = influence_report(delta, info);
        CHECK(std::abs(r.d_max[4]) == doctest::Approx(std::abs(r.d_max[dup])).epsilon(1e-8).scale(1e-12));
        CHECK(r.c_i[4] == doctest::Approx(r.c_i[dup]).epsilon(1e-12));
        CHECK(r.c_i_beta[4] == doctest::Approx(r.c_i_beta[dup]).epsilon(1e-12));
    }
}

TEST_CASE("total local influence is the curvature along coordinate directions") {
    for (std::size_t k = 0; k < testing::triple_models().size(); ++k) {
        const Fitted f = fitted(k, 30, 1700 + k);
        for (const PerturbationScheme& s : schemes_for(f.t.data)) {
            const DeltaMatrix delta = delta_for_scheme(f.t.model, f.t.data, f.fit, s);
            const TotalInfluence total = total_local_influence(delta, f.info);
            const std::size_t n = f.t.data.n();
            REQUIRE(total.c_i.size() == n);
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(total.c_i[i] >= 0.0);
                CHECK(total.c_i[i] == doctest::Approx(normal_curvature(delta, f.info, unit(n, i))).epsilon(1e-10));
                mean += total.c_i[i] / static_cast<double>(n);
            }
            CHECK(total.threshold == doctest::Approx(2.0 * mean).epsilon(1e-14));
            std::vector<std::size_t> expected;
            for (std::size_t i = 0; i < n; ++i)
                if (total.c_i[i] >= total.threshold) expected.push_back(i);
            CHECK(total.flagged == expected);
        }
    }
}

TEST_CASE("a zero Delta column has zero total influence") {
    const Fitted f = fitted(2, 30, 1800);
    DeltaMatrix delta = delta_case_weights(f.fit);
    for (std::size_t r = 0; r < delta.values.rows(); ++r) delta.values(r, 6) = 0.0;
    CHECK(total_local_influence(delta, f.info).c_i[6] == 0.0);
}

TEST_CASE("beta-subset curvature matches the Schur complement form") {
    for (std::size_t k = 0; k < testing::triple_models().size(); ++k) {
        const Fitted f = fitted(k, 30, 1900 + k);
        const DenseMatrix m = testing::beta_subset_inverse(f.info.assembled());
        for (const PerturbationScheme& s : schemes_for(f.t.data)) {
            const DeltaMatrix delta = delta_for_scheme(f.t.model, f.t.data, f.fit, s);
            const BetaCurvature beta = curvature_beta(delta, f.info);
            const DenseMatrix md = m * delta.values;
            Vector expected(f.t.data.n());
            for (std::size_t i = 0; i < expected.size(); ++i) {
                double q = 0.0;
                for (std::size_t r = 0; r < delta.values.rows(); ++r) q += delta.values(r, i) * md(r, i);
                expected[i] = 2.0 * std::abs(q);
            }
            CHECK_MESSAGE(rel_error(beta.c_i, expected) <= 1e-9, f.t.text);
            const DenseMatrix b1 = -1.0 * (delta.values.transpose() * md);
            CHECK(beta.c_dmax == doctest::Approx(2.0 * jacobi_sym_eig_max(b1.symmetrized()).value).epsilon(1e-9));
        }
    }
}

TEST_CASE("beta-subset curvature equals the full one when the alpha row vanishes") {
    const Dataset data = intercept_data(Vector{-1.0, 1.0});
    const ExprAST model = parse_model("b1", {}, 1);
    const FitResult fit = fit_mle(model, data);
    const ObservedInfo info = observed_info_at_hat(fit);
    DeltaMatrix delta = delta_case_weights(fit);
    const InfluenceReport r = influence_report(delta, info);
    for (std::size_t i = 0; i < 2; ++i) CHECK(r.c_i_beta[i] == doctest::Approx(r.c_i[i]).epsilon(1e-8));

    DeltaMatrix alpha_only = delta;
    alpha_only.values = DenseMatrix(1, 2);
    ObservedInfo no_beta{DenseMatrix(0, 0), Vector{}, -3.0};
    CHECK_THROWS_AS(curvature_beta(alpha_only, no_beta), DomainError);
}

TEST_CASE("influence_report collects the pieces") {
    const Fitted f = fitted(4, 30, 2000);
    const DeltaMatrix delta = delta_response(f.fit, sample_sd(f.t.data.y));
    const InfluenceReport r = influence_report(delta, f.info);
    const CurvatureResult top = max_curvature(delta, f.info);
    const TotalInfluence total = total_local_influence(delta, f.info);
    const BetaCurvature beta = curvature_beta(delta, f.info);
    CHECK(r.scheme.kind == SchemeKind::response);
    CHECK(r.c_dmax == top.c_dmax);
    CHECK(r.d_max == top.d_max);
    CHECK(r.c_i == total.c_i);
    CHECK(r.threshold == total.threshold);
    CHECK(r.flagged == total.flagged);
    CHECK(r.c_dmax_beta == beta.c_dmax);
    CHECK(r.c_i_beta == beta.c_i);
}

TEST_CASE("generalized leverage reduces to the linear projection") {
    const Dataset data = testing::simulate("b1 + b2*x1 + b3*x2", {{"x1", 0.0, 3.0}, {"x2", -1.0, 1.0}},
                                           Vector{0.5, 1.0, -1.0}, 0.6, 30, 83);
    const ExprAST model = parse_model("b1 + b2*x1 + b3*x2", data.covariate_names, 3);
    const FitResult fit = fit_mle(model, data);
    DenseMatrix design(data.n(), 3);
    for (std::size_t i = 0; i < data.n(); ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = data.x(i, 0);
        design(i, 2) = data.x(i, 1);
    }
    const testing::LinearForms lin(design, data.y, fit.theta_hat.beta, fit.theta_hat.alpha);
    const LeverageMatrix gl = generalized_leverage(fit);
    CHECK(rel_error(gl.gl, lin.leverage()) <= 1e-12);
    // an oblique projection onto the column space: idempotent with trace p
    CHECK(rel_error(gl.gl * gl.gl, gl.gl) <= 1e-10);
    CHECK(gl.trace() == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(gl.diagonal().size() == data.n());
}

TEST_CASE("generalized leverage matches refitting perturbed responses") {
    const Dataset data = testing::simulate("b1*exp(b2*x1)", {{"x1", 0.5, 3.0}}, Vector{2.0, 0.5}, 0.4, 20, 84);
    const ExprAST model = parse_model("b1*exp(b2*x1)", data.covariate_names, 2);
    const FitResult fit = fit_mle(model, data);
    const Theta base = testing::newton_polish(model, data, fit.theta_hat);
    const Vector mu0 = mean_values(model, data, base.beta);
    const LeverageMatrix gl = generalized_leverage(fit);
    const double eps = 1e-4 * sample_sd(data.y);
    DenseMatrix oracle(data.n(), data.n());
    for (std::size_t l = 0; l < data.n(); ++l) {
        Dataset moved = data;
        moved.y[l] += eps;
        const Theta refit = testing::newton_polish(model, moved, base);
        const Vector mu = mean_values(model, moved, refit.beta);
        for (std::size_t i = 0; i < data.n(); ++i) oracle(i, l) = (mu[i] - mu0[i]) / eps;
    }
    CHECK(rel_error(gl.gl, oracle) <= 1e-3);
}

TEST_CASE("generalized leverage is invariant under reparameterization") {
    const Dataset data = testing::simulate("b1*exp(b2*x1)", {{"x1", 0.5, 3.0}}, Vector{2.0, 0.5}, 0.4, 25, 85);
    const ExprAST scaled = parse_model("b1*exp(b2*x1)", data.covariate_names, 2);
    const ExprAST logged = parse_model("exp(b1 + b2*x1)", data.covariate_names, 2);
    const FitResult a = fit_mle(scaled, data);
    REQUIRE(a.theta_hat.beta[0] > 0.0);
    const Theta matched{{std::log(a.theta_hat.beta[0]), a.theta_hat.beta[1]}, a.theta_hat.alpha};
    FitResult b = a;
    b.theta_hat = matched;
    b.design_at_hat = build_design(logged, data, matched.beta);
    b.xi_at_hat = compute_xi(matched.alpha, data.y, b.design_at_hat.mu);
    CHECK(score(matched, logged, data).norm_inf() <= 1e-6);
    CHECK(rel_error(generalized_leverage(a).gl, generalized_leverage(b).gl) <= 1e-6);

    const FitResult refit = fit_mle(logged, data);
    CHECK(rel_error(generalized_leverage(refit).gl, generalized_leverage(a).gl) <= 1e-6);
}

TEST_CASE("generalized leverage refuses a saddle") {
    const Dataset data = intercept_data(Vector{-0.1, 0.1});
    const ExprAST model = parse_model("b1", {}, 1);
    // alpha > 2 makes the density bimodal, so its centre is a minimum in mu
    const FitResult fit = at_theta(model, data, Theta{{0.0}, 3.0});
    CHECK(observed_hessian(fit.theta_hat, model, data).lbb(0, 0) > 0.0);
    CHECK_THROWS_AS(generalized_leverage(fit), Error);
}

TEST_CASE("likelihood displacement at the null point is zero") {
    const Fitted f = fitted(3, 30, 2100);
    for (const PerturbationScheme& s : schemes_for(f.t.data)) {
        const Vector w0 = s.null_point(f.t.data.n());
        CHECK(std::abs(likelihood_displacement(f.t.model, f.t.data, f.fit, s, w0)) <= 1e-10);
    }
    CHECK_THROWS_AS(likelihood_displacement(f.t.model, f.t.data, f.fit, PerturbationScheme::case_weights(),
                                            Vector(3, 1.0)),
                    DimensionError);
}

TEST_CASE("likelihood displacement is non-negative") {
    for (std::size_t k = 0; k < testing::triple_models().size(); ++k) {
        const Fitted f = fitted(k, 30, 2200 + k);
        Rng rng(2200 + k);
        for (const PerturbationScheme& s : schemes_for(f.t.data)) {
            Vector w = s.null_point(f.t.data.n());
            const Vector d = testing::random_unit(rng, w.size());
            for (std::size_t i = 0; i < w.size(); ++i) w[i] += 0.3 * d[i];
            CHECK_MESSAGE(likelihood_displacement(f.t.model, f.t.data, f.fit, s, w) >= -1e-8, f.t.text);
        }
    }
}

TEST_CASE("zero case weight gives the deletion displacement") {
    const Fitted f = fitted(4, 30, 2300);
    Vector w(f.t.data.n(), 1.0);
    w[11] = 0.0;
    const double ld = likelihood_displacement(f.t.model, f.t.data, f.fit, PerturbationScheme::case_weights(), w);
    const Dataset reduced = f.t.data.without_row(11);
    const Theta deleted = testing::newton_polish(f.t.model, reduced, fit_mle(f.t.model, reduced).theta_hat);
    const double expected =
        2.0 * (loglik(f.fit.theta_hat, f.t.model, f.t.data) - loglik(deleted, f.t.model, f.t.data));
    CHECK(ld == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("perturbed_loglik agrees with the density-based oracle") {
    const Fitted f = fitted(6, 30, 2400);
    Rng rng(24);
    for (const PerturbationScheme& s : schemes_for(f.t.data)) {
        const CrossFunction mine = perturbed_loglik(f.t.model, f.t.data, s);
        const CrossFunction ref = oracle_for(f.t, s);
        Vector w = s.null_point(f.t.data.n());
        CHECK(mine(f.fit.theta_hat.packed(), w) ==
              doctest::Approx(loglik(f.fit.theta_hat, f.t.model, f.t.data)).epsilon(1e-13));
        for (double& x : w) x += 0.2 * rng.normal();
        CHECK(mine(f.fit.theta_hat.packed(), w) == doctest::Approx(ref(f.fit.theta_hat.packed(), w)).epsilon(1e-12));
    }
}

TEST_CASE("normal curvature is the second derivative of the displacement") {
    const Dataset data = testing::simulate("b1*exp(b2*x1)", {{"x1", 0.5, 3.0}}, Vector{2.0, 0.5}, 0.4, 20, 86);
    const ExprAST model = parse_model("b1*exp(b2*x1)", data.covariate_names, 2);
    const FitResult fit = fit_mle(model, data);
    const ObservedInfo info = observed_info_at_hat(fit);
    Rng rng(86);
    const Vector steps{-0.02, -0.01, 0.01, 0.02};
    for (const PerturbationScheme& s : schemes_for(data)) {
        const DeltaMatrix delta = delta_for_scheme(model, data, fit, s);
        std::vector<Vector> dirs{max_curvature(delta, info).d_max};
        for (int k = 0; k < 3; ++k) dirs.push_back(testing::random_unit(rng, data.n()));
        for (const Vector& d : dirs) {
            Vector ld;
            for (double a : steps) {
                Vector w = s.null_point(data.n());
                for (std::size_t i = 0; i < w.size(); ++i) w[i] += a * d[i];
                ld.push_back(likelihood_displacement(model, data, fit, s, w));
            }
            const double second = testing::quadratic_second_derivative(steps, ld);
            CHECK_MESSAGE(second == doctest::Approx(normal_curvature(delta, info, d)).epsilon(0.05),
                          scheme_name(s.kind));
        }
    }
}

}  // TEST_SUITE
