#pragma once

// Log-likelihood of the Birnbaum-Saunders nonlinear regression model
//   y_i = f(x_i; beta) + e_i,  e_i ~ SN(alpha, 0, 2)
// and its first and second derivatives, all written in terms of
//   xi1_i = (2/alpha) cosh((y_i - mu_i)/2),  xi2_i = (2/alpha) sinh((y_i - mu_i)/2).

#include "bsdiag/model.hpp"
#include "bsdiag/numeric.hpp"

namespace bsdiag {

struct Theta {
    Vector beta;
    double alpha = 1.0;

    /// (beta_1, ..., beta_p, alpha)
    Vector packed() const;
    static Theta unpack(std::span<const double> packed);
};

struct XiTable {
    Vector xi1;
    Vector xi2;
};

/// Second derivatives of the log-likelihood (not negated):
/// lbb = d2l/dbeta dbeta^T, lba = d2l/dbeta dalpha, laa = d2l/dalpha^2.
struct ObservedInfo {
    DenseMatrix lbb;
    Vector lba;
    double laa = 0.0;

    std::size_t p() const noexcept { return lba.size(); }
    /// Symmetric (p+1) x (p+1) matrix with alpha last.
    DenseMatrix assembled() const;
};

/// Residuals beyond this magnitude make cosh overflow; compute_xi refuses them.
inline constexpr double kMaxResidual = 700.0;

XiTable compute_xi(double alpha, std::span<const double> y, std::span<const double> mu);

/// s_i = xi1 xi2 - xi2 / xi1 (equal to 2 dl_i/dmu_i).
Vector score_weights(const XiTable& xi);

/// Per-observation terms -log(8 pi)/2 + log xi1_i - xi2_i^2 / 2, from residuals.
Vector per_obs_loglik(double alpha, std::span<const double> y, std::span<const double> mu);
Vector per_obs_loglik(const Theta& theta, const ExprAST& model, const Dataset& data);
double loglik(const Theta& theta, const ExprAST& model, const Dataset& data);

struct Score {
    Vector beta;
    double alpha = 0.0;

    Vector packed() const;
    double norm_inf() const;
};

Score score(const Theta& theta, const ExprAST& model, const Dataset& data);
/// Score from an already evaluated design and xi table.
Score score(double alpha, const DesignBundle& design, const XiTable& xi);

/// [s^T][G] = sum_i s_i G[i].
DenseMatrix bracket_term(std::span<const double> s, const std::vector<DenseMatrix>& g);

/// v_i = -(2 xi2^2 + 4/alpha^2 - 1 + xi2^2/xi1^2)/4  (d2 l_i / dmu_i^2)
Vector curvature_weights(double alpha, const XiTable& xi);
/// h_i = -xi1 xi2 / alpha  (d2 l_i / dmu_i dalpha)
Vector cross_weights(double alpha, const XiTable& xi);

ObservedInfo observed_hessian(const Theta& theta, const ExprAST& model, const Dataset& data);
ObservedInfo observed_hessian(double alpha, const DesignBundle& design, const XiTable& xi);

/// d2 l / dtheta dy^T = -[D^T diag(v); h^T], a (p+1) x n matrix.
DenseMatrix cross_deriv_y(const Theta& theta, const ExprAST& model, const Dataset& data);
DenseMatrix cross_deriv_y(double alpha, const DesignBundle& design, const XiTable& xi);

}  // namespace bsdiag
