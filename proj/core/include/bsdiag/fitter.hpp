#pragma once

#include "bsdiag/likelihood.hpp"
#include "bsdiag/model.hpp"
#include "bsdiag/numeric.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bsdiag {

struct FitOptions {
    double tol = 1e-8;
    std::size_t max_iter = 200;
    std::optional<Theta> init;
};

struct IterationRecord {
    std::size_t iteration = 0;
    double loglik = 0.0;
    double alpha = 0.0;
    double step_scale = 1.0;   // 1 for a full update, 2^-k after k halvings
    double max_rel_change = 0.0;
};

struct FitResult {
    Theta theta_hat;
    double loglik_at_hat = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double score_norm = 0.0;
    std::optional<DenseMatrix> covariance;
    DesignBundle design_at_hat;
    XiTable xi_at_hat;
    std::vector<IterationRecord> trace;
    std::vector<std::string> warnings;
};

/// psi(alpha) = 2 + 4/alpha^2 - (sqrt(2 pi)/alpha) erfcx(sqrt(2)/alpha).
double psi_alpha(double alpha);

/// Starting values: damped Gauss-Newton least squares for beta, then the
/// closed-form root of U_alpha = 0 at that beta. A zero residual vector floors
/// alpha at 1e-6 and appends a warning to `warnings` when given.
Theta init_params(const ExprAST& model, const Dataset& data,
                  std::vector<std::string>* warnings = nullptr);

/// Maximum likelihood by the joint iterative scheme
///   beta <- (D^T D)^{-1} D^T (D beta + (2/psi(alpha)) s),   alpha <- alpha (1 + mean xi2^2) / 2
/// with step halving whenever a joint update lowers the log-likelihood.
FitResult fit_mle(const ExprAST& model, const Dataset& data, const FitOptions& opts = {});

/// Observed second-derivative matrix at the fitted parameters.
ObservedInfo observed_info_at_hat(const FitResult& fit);

/// (-L(theta_hat))^{-1}. Throws if the fit did not converge or -L is not
/// positive definite ("not a local maximum").
DenseMatrix asymptotic_covariance(const FitResult& fit);

/// Damped Newton ascent on an arbitrary log-likelihood over packed
/// (beta, alpha), using finite-difference gradient and Hessian, until the
/// gradient infinity-norm drops to 1e-8 * max(1, |l|) or the Newton step
/// predicts a gain below 1e-14 * max(1, |l|). Throws ConvergenceError
/// carrying the best iterate after 200 iterations.
Theta refit_perturbed(const ScalarFunction& perturbed_loglik, const Theta& init);

}  // namespace bsdiag
