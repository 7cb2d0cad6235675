#pragma once

// Mean-function language and its second-order forward-mode evaluation.
//
// Grammar (EBNF):
//   expr    = term { ("+" | "-") term } ;
//   term    = unary { ("*" | "/") unary } ;
//   unary   = "-" unary | power ;
//   power   = primary [ "^" unary ] ;            (* right-associative *)
//   primary = number | param | covariate | func "(" expr ")" | "(" expr ")" ;
//   param   = "b" digit { digit } ;              (* b1 .. bp *)
//   func    = "exp" | "log" | "sqrt" | "sinh" | "cosh" | "tanh" | "arcsinh" ;

#include "bsdiag/numeric.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bsdiag {

/// n responses (log-lifetimes) with an n x m covariate table.
struct Dataset {
    Vector y;
    std::vector<std::string> covariate_names;
    DenseMatrix x;

    Dataset() = default;
    Dataset(Vector y, std::vector<std::string> names, DenseMatrix x);

    std::size_t n() const noexcept { return y.size(); }
    std::size_t m() const noexcept { return covariate_names.size(); }
    std::optional<std::size_t> covariate_index(std::string_view name) const;
    /// Copy without row i.
    Dataset without_row(std::size_t i) const;
};

enum class NodeKind { constant, covariate, parameter, negate, add, subtract, multiply, divide, power, call };
enum class Function { exp, log, sqrt, sinh, cosh, tanh, arcsinh };

struct ExprNode {
    NodeKind kind = NodeKind::constant;
    double value = 0.0;        // constant
    std::size_t index = 0;     // covariate column or parameter (0-based)
    Function function = Function::exp;
    std::size_t lhs = 0;       // operand / left child
    std::size_t rhs = 0;       // right child
    std::size_t offset = 0;    // byte offset in the source text
    bool data_free = true;     // subtree references no parameter and no covariate
};

/// Parsed mean function. Nodes are stored in post-order, so children always
/// precede their parent and the root is the last node.
class ExprAST {
public:
    ExprAST(std::vector<ExprNode> nodes, std::size_t parameter_count,
            std::vector<std::string> covariate_names, std::string text);

    const std::vector<ExprNode>& nodes() const noexcept { return nodes_; }
    std::size_t parameter_count() const noexcept { return p_; }
    const std::vector<std::string>& covariate_names() const noexcept { return names_; }
    const std::string& text() const noexcept { return text_; }
    bool references_covariate(std::size_t j) const;
    bool references_parameter(std::size_t k) const;

private:
    std::vector<ExprNode> nodes_;
    std::size_t p_;
    std::vector<std::string> names_;
    std::string text_;
};

/// Parses `text` against the declared covariate names, allowing b1..b`p`.
ExprAST parse_model(std::string_view text, const std::vector<std::string>& covariate_names,
                    std::size_t p);
/// As above with p taken as the largest parameter index referenced.
ExprAST parse_model(std::string_view text, const std::vector<std::string>& covariate_names);

/// Fully parenthesised rendering that reparses to a structurally identical tree.
std::string pretty_print(const ExprAST& ast);
bool structurally_equal(const ExprAST& a, const ExprAST& b);

/// Expands "linear", "exp-growth" or "michaelis-menten" into model text over
/// the given covariates. Throws DomainError for unknown names.
std::string builtin_model_text(std::string_view name, const std::vector<std::string>& covariate_names);

/// Value with gradient and Hessian with respect to `dim` active variables.
struct Dual2 {
    double value = 0.0;
    Vector grad;
    DenseMatrix hess;

    Dual2() = default;
    Dual2(double v, std::size_t dim) : value(v), grad(dim, 0.0), hess(dim, dim) {}
    static Dual2 variable(double v, std::size_t dim, std::size_t slot);
    std::size_t dim() const noexcept { return grad.size(); }
    bool is_constant() const;
};

Dual2 operator+(const Dual2& a, const Dual2& b);
Dual2 operator-(const Dual2& a, const Dual2& b);
Dual2 operator*(const Dual2& a, const Dual2& b);
Dual2 operator/(const Dual2& a, const Dual2& b);
Dual2 operator-(const Dual2& a);

/// f(x; beta) only.
double eval_value(const ExprAST& ast, std::span<const double> x, std::span<const double> beta);

/// Value, gradient and Hessian of f(x; beta). The active variables are
/// beta_1..beta_p, followed by covariate `wrt_covariate` when given; every
/// occurrence of that covariate is differentiated jointly.
Dual2 eval_dual2(const ExprAST& ast, std::span<const double> x, std::span<const double> beta,
                 std::optional<std::size_t> wrt_covariate = std::nullopt);

/// mu (n), D = dmu/dbeta (n x p), G[i] = d2 mu_i / dbeta dbeta^T (p x p each).
struct DesignBundle {
    Vector mu;
    DenseMatrix d;
    std::vector<DenseMatrix> g;
};

enum class RankCheck { enforce, skip };

/// Stacks eval_dual2 over the rows of `data`. With RankCheck::enforce a
/// numerically rank-deficient D raises SingularError.
DesignBundle build_design(const ExprAST& ast, const Dataset& data, std::span<const double> beta,
                          RankCheck check = RankCheck::enforce);

/// mu_i = f(x_i; beta) for every row.
Vector mean_values(const ExprAST& ast, const Dataset& data, std::span<const double> beta);

}  // namespace bsdiag
