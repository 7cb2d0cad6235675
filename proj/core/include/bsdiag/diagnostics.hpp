#pragma once

// Local influence for the fitted model: perturbation matrices Delta for the
// case-weight, response and explanatory-variable schemes, normal curvatures,
// total local influence and generalized leverage.

#include "bsdiag/fitter.hpp"
#include "bsdiag/likelihood.hpp"
#include "bsdiag/model.hpp"
#include "bsdiag/numeric.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bsdiag {

enum class SchemeKind { case_weights, response, explanatory };

std::string_view scheme_name(SchemeKind kind);
/// Accepts "case-weights", "response", "explanatory".
std::optional<SchemeKind> parse_scheme_name(std::string_view name);

struct PerturbationScheme {
    SchemeKind kind = SchemeKind::case_weights;
    std::optional<std::size_t> covariate;  // explanatory only
    double scale = 1.0;                     // S_y or S_x; unused for case weights

    static PerturbationScheme case_weights() { return {}; }
    static PerturbationScheme response(double s_y) { return {SchemeKind::response, std::nullopt, s_y}; }
    static PerturbationScheme explanatory(std::size_t j, double s_x) {
        return {SchemeKind::explanatory, j, s_x};
    }

    /// omega_0: ones for case weights, zeros otherwise.
    Vector null_point(std::size_t n) const;
};

/// (p+1) x n matrix of d2 l(theta|omega) / dtheta domega^T at (theta_hat, omega_0).
struct DeltaMatrix {
    PerturbationScheme scheme;
    DenseMatrix values;
    Vector omega0;
    std::vector<std::string> warnings;
};

/// Sample standard deviation with divisor n - 1.
double sample_sd(std::span<const double> v);

DeltaMatrix delta_case_weights(const FitResult& fit);
DeltaMatrix delta_response(const FitResult& fit, double s_y);
/// Perturbs covariate j by omega_i * S_x in every row; derivatives of the mean
/// function with respect to x_j come from the model by automatic differentiation.
DeltaMatrix delta_explanatory(const ExprAST& model, const Dataset& data, const FitResult& fit,
                              std::size_t j, double s_x);

/// Dispatches on scheme.kind.
DeltaMatrix delta_for_scheme(const ExprAST& model, const Dataset& data, const FitResult& fit,
                             const PerturbationScheme& scheme);

/// C_d = 2 |d^T Delta^T L^{-1} Delta d|.
double normal_curvature(const DeltaMatrix& delta, const ObservedInfo& info, std::span<const double> d);

struct CurvatureResult {
    double c_dmax = 0.0;
    Vector d_max;
    std::vector<std::string> warnings;
};

/// B = -Delta^T L^{-1} Delta; C_dmax = 2 lambda_max(B), d_max its unit eigenvector.
CurvatureResult max_curvature(const DeltaMatrix& delta, const ObservedInfo& info);

struct BetaCurvature {
    double c_dmax = 0.0;
    Vector d_max;
    Vector c_i;
    std::vector<std::string> warnings;
};

/// Same machinery with L^{-1} replaced by L^{-1} - diag(0, ..., 0, 1/L_aa).
BetaCurvature curvature_beta(const DeltaMatrix& delta, const ObservedInfo& info);

struct TotalInfluence {
    Vector c_i;
    double threshold = 0.0;              // 2 * mean(C_i)
    std::vector<std::size_t> flagged;    // 0-based, ascending, C_i >= threshold
};

TotalInfluence total_local_influence(const DeltaMatrix& delta, const ObservedInfo& info);

struct InfluenceReport {
    PerturbationScheme scheme;
    double c_dmax = 0.0;
    Vector d_max;
    Vector c_i;
    double threshold = 0.0;
    std::vector<std::size_t> flagged;
    double c_dmax_beta = 0.0;
    Vector d_max_beta;
    Vector c_i_beta;
    std::vector<std::string> warnings;
};

InfluenceReport influence_report(const DeltaMatrix& delta, const ObservedInfo& info);

struct LeverageMatrix {
    DenseMatrix gl;
    double trace() const;
    Vector diagonal() const;
};

/// GL = [D 0] (-L)^{-1} L_theta_y at theta_hat.
LeverageMatrix generalized_leverage(const FitResult& fit);

/// l(theta | omega) for the scheme, theta packed as (beta, alpha).
CrossFunction perturbed_loglik(const ExprAST& model, const Dataset& data,
                               const PerturbationScheme& scheme);

/// LD = 2 { l(theta_hat) - l(theta_hat_omega) } with theta_hat_omega found by refit_perturbed.
double likelihood_displacement(const ExprAST& model, const Dataset& data, const FitResult& fit,
                               const PerturbationScheme& scheme, std::span<const double> omega);

}  // namespace bsdiag
