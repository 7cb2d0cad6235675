#include "bsdiag/fitter.hpp"

#include "bsdiag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace bsdiag {

double psi_alpha(double alpha) {
    if (!(alpha > 0.0)) throw DomainError("psi_alpha: alpha must be positive");
    const double x = std::numbers::sqrt2 / alpha;
    return 2.0 + 4.0 / (alpha * alpha) -
           std::sqrt(2.0 * std::numbers::pi) / alpha * erfcx(x);
}

namespace {

constexpr double kAlphaFloor = 1e-6;

double sum_squares(std::span<const double> y, std::span<const double> mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - mu[i]) * (y[i] - mu[i]);
    return s;
}

// Sum of squares at beta, or +inf when the mean function cannot be evaluated.
double try_sum_squares(const ExprAST& model, const Dataset& data, std::span<const double> beta) {
    try {
        const Vector mu = mean_values(model, data, beta);
        const double s = sum_squares(data.y, mu);
        return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

Vector gauss_newton(const ExprAST& model, const Dataset& data) {
    const std::size_t p = model.parameter_count();
    Vector beta(p, 1.0);
    double sse = try_sum_squares(model, data, beta);
    if (!std::isfinite(sse)) {
        beta.assign(p, 0.1);
        sse = try_sum_squares(model, data, beta);
    }
    if (!std::isfinite(sse))
        throw ConvergenceError(
            "Gauss-Newton initialisation: mean function not evaluable at the default start; "
            "supply explicit starting values (--init)",
            beta);

    double lambda = 1e-3;
    for (int iter = 0; iter < 50; ++iter) {
        const DesignBundle design = build_design(model, data, beta, RankCheck::skip);
        DenseMatrix jtj(p, p);
        Vector jtr(p, 0.0);
        for (std::size_t i = 0; i < data.n(); ++i) {
            const double r = data.y[i] - design.mu[i];
            for (std::size_t a = 0; a < p; ++a) {
                jtr[a] += design.d(i, a) * r;
                for (std::size_t b = 0; b < p; ++b) jtj(a, b) += design.d(i, a) * design.d(i, b);
            }
        }
        bool improved = false;
        double new_sse = sse;
        Vector trial;
        for (int attempt = 0; attempt < 12 && !improved; ++attempt) {
            DenseMatrix damped = jtj;
            for (std::size_t a = 0; a < p; ++a) damped(a, a) += lambda * (jtj(a, a) + 1e-12);
            Vector step;
            try {
                step = cholesky_solve(damped, jtr);
            } catch (const Error&) {
                lambda *= 10.0;
                continue;
            }
            trial = beta;
            for (std::size_t a = 0; a < p; ++a) trial[a] += step[a];
            new_sse = try_sum_squares(model, data, trial);
            if (new_sse < sse) {
                improved = true;
                lambda = std::max(lambda / 10.0, 1e-12);
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) break;
        const double rel = (sse - new_sse) / std::max(sse, 1e-300);
        beta = std::move(trial);
        sse = new_sse;
        if (rel < 1e-14 || sse == 0.0) break;
    }
    if (!std::isfinite(sse))
        throw ConvergenceError("Gauss-Newton initialisation diverged; supply explicit starting values (--init)",
                               beta);
    return beta;
}

struct Evaluation {
    DesignBundle design;
    XiTable xi;
    double loglik = 0.0;
};

Evaluation evaluate(const ExprAST& model, const Dataset& data, const Theta& theta, RankCheck check) {
    Evaluation e;
    e.design = build_design(model, data, theta.beta, check);
    e.xi = compute_xi(theta.alpha, data.y, e.design.mu);
    e.loglik = 0.0;
    for (double l : per_obs_loglik(theta.alpha, data.y, e.design.mu)) e.loglik += l;
    return e;
}

double try_loglik(const ExprAST& model, const Dataset& data, const Theta& theta) {
    if (!(theta.alpha > 0.0)) return -std::numeric_limits<double>::infinity();
    try {
        const double l = loglik(theta, model, data);
        return std::isfinite(l) ? l : -std::numeric_limits<double>::infinity();
    } catch (const Error&) {
        return -std::numeric_limits<double>::infinity();
    }
}

}  // namespace

Theta init_params(const ExprAST& model, const Dataset& data, std::vector<std::string>* warnings) {
    if (data.n() < model.parameter_count())
        throw DimensionError("init_params: n < p");
    Theta theta{gauss_newton(model, data), 0.0};
    const Vector mu = mean_values(model, data, theta.beta);
    double acc = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double sh = std::sinh(0.5 * (data.y[i] - mu[i]));
        acc += sh * sh;
    }
    theta.alpha = std::sqrt(4.0 * acc / static_cast<double>(data.n()));
    if (!(theta.alpha > kAlphaFloor)) {
        theta.alpha = kAlphaFloor;
        if (warnings)
            warnings->push_back("initial residuals are (near) zero; alpha start floored at 1e-6 and the "
                                "likelihood may be unbounded");
    }
    return theta;
}

FitResult fit_mle(const ExprAST& model, const Dataset& data, const FitOptions& opts) {
    const std::size_t p = model.parameter_count();
    if (!(opts.tol > 0.0)) throw DomainError("fit_mle: tol must be positive");
    if (opts.max_iter < 1) throw DomainError("fit_mle: max_iter must be at least 1");
    if (data.n() < p + 1)
        throw DimensionError("fit_mle: need n >= p + 1 observations (n = " + std::to_string(data.n()) +
                             ", p = " + std::to_string(p) + ")");

    FitResult fit;
    Theta theta = opts.init ? *opts.init : init_params(model, data, &fit.warnings);
    if (theta.beta.size() != p)
        throw DimensionError("fit_mle: initial beta has " + std::to_string(theta.beta.size()) +
                             " entries, model has " + std::to_string(p) + " parameters");
    if (!(theta.alpha > 0.0)) throw DomainError("fit_mle: initial alpha must be positive");

    Evaluation current = evaluate(model, data, theta, RankCheck::enforce);
    const double n = static_cast<double>(data.n());

    for (std::size_t iter = 1; iter <= opts.max_iter; ++iter) {
        const Vector s = score_weights(current.xi);
        const double weight = 2.0 / psi_alpha(theta.alpha);
        Vector zeta = current.design.d * theta.beta;
        for (std::size_t i = 0; i < zeta.size(); ++i) zeta[i] += weight * s[i];
        const Vector beta_target = qr_least_squares(current.design.d, zeta);
        double mean_xi2 = 0.0;
        for (double x : current.xi.xi2) mean_xi2 += x * x;
        mean_xi2 /= n;
        const double alpha_target = 0.5 * theta.alpha * (1.0 + mean_xi2);

        // Accept the full update unless it lowers the log-likelihood beyond rounding.
        const double slack = 1e-13 * std::max(1.0, std::abs(current.loglik));
        double scale = 1.0;
        std::optional<Theta> accepted;
        double accepted_loglik = current.loglik;
        for (int halving = 0; halving <= 20; ++halving) {
            Theta trial{theta.beta, theta.alpha + scale * (alpha_target - theta.alpha)};
            for (std::size_t k = 0; k < p; ++k)
                trial.beta[k] += scale * (beta_target[k] - theta.beta[k]);
            const double l = try_loglik(model, data, trial);
            if (l >= current.loglik - slack) {
                accepted = std::move(trial);
                accepted_loglik = l;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            fit.warnings.push_back("step halving exhausted at iteration " + std::to_string(iter));
            break;
        }

        double max_rel = 0.0;
        const Vector old_packed = theta.packed();
        const Vector new_packed = accepted->packed();
        for (std::size_t k = 0; k < old_packed.size(); ++k)
            max_rel = std::max(max_rel, std::abs(new_packed[k] - old_packed[k]) /
                                            std::max(1.0, std::abs(old_packed[k])));
        const double dl = accepted_loglik - current.loglik;

        theta = std::move(*accepted);
        current = evaluate(model, data, theta, RankCheck::enforce);
        fit.iterations = iter;
        fit.trace.push_back({iter, current.loglik, theta.alpha, scale, max_rel});

        const double lscale = std::max(1.0, std::abs(current.loglik));
        if (max_rel <= opts.tol && std::abs(dl) <= opts.tol * lscale) {
            const double snorm = score(theta.alpha, current.design, current.xi).norm_inf();
            if (snorm <= opts.tol * lscale) {
                fit.converged = true;
                break;
            }
        }
    }

    fit.theta_hat = theta;
    fit.loglik_at_hat = current.loglik;
    fit.score_norm = score(theta.alpha, current.design, current.xi).norm_inf();
    fit.design_at_hat = std::move(current.design);
    fit.xi_at_hat = std::move(current.xi);
    if (!fit.converged)
        fit.warnings.push_back("no convergence after " + std::to_string(fit.iterations) + " iterations");

    if (fit.converged) {
        try {
            fit.covariance = asymptotic_covariance(fit);
        } catch (const Error& e) {
            fit.warnings.push_back(std::string("covariance unavailable: ") + e.what());
        }
    }
    return fit;
}

ObservedInfo observed_info_at_hat(const FitResult& fit) {
    return observed_hessian(fit.theta_hat.alpha, fit.design_at_hat, fit.xi_at_hat);
}

DenseMatrix asymptotic_covariance(const FitResult& fit) {
    if (!fit.converged) throw Error("asymptotic_covariance: fit did not converge");
    const DenseMatrix neg = -1.0 * observed_info_at_hat(fit).assembled();
    try {
        return cholesky_inverse(neg);
    } catch (const NotPositiveDefiniteError& e) {
        throw Error(std::string("not a local maximum: -L is not positive definite (") + e.what() + ")");
    }
}

Theta refit_perturbed(const ScalarFunction& perturbed_loglik, const Theta& init) {
    const auto safe = [&](std::span<const double> x) {
        if (!(x.back() > 0.0)) return -std::numeric_limits<double>::infinity();
        try {
            const double v = perturbed_loglik(x);
            return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
        } catch (const Error&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    Vector x = init.packed();
    double fx = safe(x);
    if (!std::isfinite(fx))
        throw ConvergenceError("refit_perturbed: log-likelihood not finite at the starting point", x);

    for (int iter = 0; iter < 200; ++iter) {
        const Vector g = fd_gradient_ridders(perturbed_loglik, x);
        if (norm_inf(g) <= 1e-8 * std::max(1.0, std::abs(fx))) return Theta::unpack(x);

        const DenseMatrix h = fd_hessian(perturbed_loglik, x);
        const std::size_t dim = x.size();
        DenseMatrix neg = -1.0 * h;
        Vector step;
        double shift = 0.0;
        const double diag_scale = std::max(neg.max_abs(), 1e-12);
        for (int attempt = 0; attempt < 30; ++attempt) {
            DenseMatrix m = neg;
            for (std::size_t k = 0; k < dim; ++k) m(k, k) += shift;
            try {
                step = cholesky_solve(m.symmetrized(), g);
                break;
            } catch (const NotPositiveDefiniteError&) {
                shift = shift == 0.0 ? 1e-8 * diag_scale : shift * 10.0;
            }
        }
        if (step.empty())
            throw ConvergenceError("refit_perturbed: could not form an ascent direction", x);
        // predicted gain already at the rounding level of l
        if (0.5 * dot(g, step) <= 1e-14 * std::max(1.0, std::abs(fx))) return Theta::unpack(x);

        double t = 1.0;
        bool moved = false;
        for (int halving = 0; halving < 40; ++halving) {
            Vector trial = x;
            for (std::size_t k = 0; k < dim; ++k) trial[k] += t * step[k];
            const double ft = safe(trial);
            if (ft >= fx) {
                x = std::move(trial);
                fx = ft;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved)
            throw ConvergenceError("refit_perturbed: line search failed before reaching the gradient tolerance",
                                   x);
    }
    throw ConvergenceError("refit_perturbed: no convergence in 200 iterations", x);
}

}  // namespace bsdiag
