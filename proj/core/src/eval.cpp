#include "bsdiag/errors.hpp"
#include "bsdiag/model.hpp"

#include <cmath>
#include <string>

namespace bsdiag {

// --- Dual2 arithmetic ----------------------------------------------------

Dual2 Dual2::variable(double v, std::size_t dim, std::size_t slot) {
    Dual2 d(v, dim);
    d.grad[slot] = 1.0;
    return d;
}

bool Dual2::is_constant() const {
    for (double g : grad)
        if (g != 0.0) return false;
    for (double h : hess.data())
        if (h != 0.0) return false;
    return true;
}

namespace {

void require_same_dim(const Dual2& a, const Dual2& b) {
    if (a.dim() != b.dim()) throw DimensionError("Dual2: operands have different dimensions");
}

// f(u) given f(u.value), f'(u.value), f''(u.value).
Dual2 chain(const Dual2& u, double f0, double f1, double f2) {
    const std::size_t n = u.dim();
    Dual2 out(f0, n);
    for (std::size_t i = 0; i < n; ++i) out.grad[i] = f1 * u.grad[i];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double h = f1 * u.hess(i, j) + f2 * u.grad[i] * u.grad[j];
            out.hess(i, j) = h;
            out.hess(j, i) = h;
        }
    return out;
}

}  // namespace

Dual2 operator+(const Dual2& a, const Dual2& b) {
    require_same_dim(a, b);
    Dual2 out(a.value + b.value, a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) out.grad[i] = a.grad[i] + b.grad[i];
    out.hess = a.hess + b.hess;
    return out;
}

Dual2 operator-(const Dual2& a, const Dual2& b) {
    require_same_dim(a, b);
    Dual2 out(a.value - b.value, a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) out.grad[i] = a.grad[i] - b.grad[i];
    out.hess = a.hess - b.hess;
    return out;
}

Dual2 operator-(const Dual2& a) { return chain(a, -a.value, -1.0, 0.0); }

Dual2 operator*(const Dual2& a, const Dual2& b) {
    require_same_dim(a, b);
    const std::size_t n = a.dim();
    Dual2 out(a.value * b.value, n);
    for (std::size_t i = 0; i < n; ++i) out.grad[i] = a.value * b.grad[i] + b.value * a.grad[i];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double h = a.value * b.hess(i, j) + b.value * a.hess(i, j) +
                             a.grad[i] * b.grad[j] + a.grad[j] * b.grad[i];
            out.hess(i, j) = h;
            out.hess(j, i) = h;
        }
    return out;
}

Dual2 operator/(const Dual2& a, const Dual2& b) {
    const double inv = 1.0 / b.value;
    return a * chain(b, inv, -inv * inv, 2.0 * inv * inv * inv);
}

// --- evaluation ----------------------------------------------------------

namespace {

[[noreturn]] void fail(const std::string& what, const ExprNode& node) {
    throw EvaluationError(what, node.offset);
}

// Scalar-type adaptors so one evaluator serves both double and Dual2.
struct ValueOps {
    using T = double;
    std::size_t dim() const { return 0; }
    static double value(double v) { return v; }
    static bool constant(double) { return true; }
    T make_constant(double v) const { return v; }
    static T unary(double u, double f0, double, double) {
        (void)u;
        return f0;
    }
};

struct DualOps {
    using T = Dual2;
    std::size_t n;
    std::size_t dim() const { return n; }
    static double value(const Dual2& v) { return v.value; }
    static bool constant(const Dual2& v) { return v.is_constant(); }
    T make_constant(double v) const { return Dual2(v, n); }
    static T unary(const Dual2& u, double f0, double f1, double f2) { return chain(u, f0, f1, f2); }
};

template <typename Ops>
typename Ops::T apply_function(const Ops& ops, const ExprNode& node, const typename Ops::T& u) {
    const double x = Ops::value(u);
    const bool need_derivatives = !Ops::constant(u);
    switch (node.function) {
        case Function::exp: {
            const double e = std::exp(x);
            return Ops::unary(u, e, e, e);
        }
        case Function::log:
            if (!(x > 0.0)) fail("log of non-positive value " + std::to_string(x), node);
            return Ops::unary(u, std::log(x), 1.0 / x, -1.0 / (x * x));
        case Function::sqrt: {
            if (x < 0.0) fail("sqrt of negative value " + std::to_string(x), node);
            const double s = std::sqrt(x);
            if (!need_derivatives) return ops.make_constant(s);
            if (!(x > 0.0)) fail("sqrt is not differentiable at 0", node);
            return Ops::unary(u, s, 0.5 / s, -0.25 / (s * x));
        }
        case Function::sinh: return Ops::unary(u, std::sinh(x), std::cosh(x), std::sinh(x));
        case Function::cosh: return Ops::unary(u, std::cosh(x), std::sinh(x), std::cosh(x));
        case Function::tanh: {
            const double t = std::tanh(x);
            const double s2 = 1.0 - t * t;
            return Ops::unary(u, t, s2, -2.0 * t * s2);
        }
        case Function::arcsinh: {
            const double r = 1.0 / std::sqrt(1.0 + x * x);
            return Ops::unary(u, std::asinh(x), r, -x * r * r * r);
        }
    }
    fail("unknown function", node);
}

template <typename Ops>
typename Ops::T power(const Ops& ops, const ExprNode& node, const ExprNode& exponent_node,
                      const typename Ops::T& base, const typename Ops::T& exponent) {
    using T = typename Ops::T;
    const double b = Ops::value(base);
    const double c = Ops::value(exponent);
    if (exponent_node.data_free && std::floor(c) == c) {
        if (b == 0.0 && c < 0.0) fail("division by zero in power", node);
        if (Ops::constant(base)) return ops.make_constant(std::pow(b, c));
        const double f1 = c == 0.0 ? 0.0 : c * std::pow(b, c - 1.0);
        const double f2 = (c == 0.0 || c == 1.0) ? 0.0 : c * (c - 1.0) * std::pow(b, c - 2.0);
        return Ops::unary(base, std::pow(b, c), f1, f2);
    }
    if (!(b > 0.0))
        fail("non-integer power requires a positive base, got " + std::to_string(b), node);
    const double lb = std::log(b);
    const T log_base = Ops::unary(base, lb, 1.0 / b, -1.0 / (b * b));
    const T product = exponent * log_base;
    const double e = std::exp(Ops::value(product));
    return Ops::unary(product, e, e, e);
}

template <typename Ops, typename Leaf>
typename Ops::T evaluate(const ExprAST& ast, const Ops& ops, Leaf&& leaf) {
    using T = typename Ops::T;
    const auto& nodes = ast.nodes();
    std::vector<T> values;
    values.reserve(nodes.size());
    for (const ExprNode& node : nodes) {
        T v{};
        switch (node.kind) {
            case NodeKind::constant: v = ops.make_constant(node.value); break;
            case NodeKind::covariate:
            case NodeKind::parameter: v = leaf(node); break;
            case NodeKind::negate: v = -values[node.lhs]; break;
            case NodeKind::add: v = values[node.lhs] + values[node.rhs]; break;
            case NodeKind::subtract: v = values[node.lhs] - values[node.rhs]; break;
            case NodeKind::multiply: v = values[node.lhs] * values[node.rhs]; break;
            case NodeKind::divide:
                if (Ops::value(values[node.rhs]) == 0.0) fail("division by zero", node);
                v = values[node.lhs] / values[node.rhs];
                break;
            case NodeKind::power:
                v = power(ops, node, nodes[node.rhs], values[node.lhs], values[node.rhs]);
                break;
            case NodeKind::call: v = apply_function(ops, node, values[node.lhs]); break;
        }
        if (!std::isfinite(Ops::value(v))) fail("non-finite intermediate value", node);
        values.push_back(std::move(v));
    }
    return std::move(values.back());
}

void check_inputs(const ExprAST& ast, std::span<const double> x, std::span<const double> beta) {
    if (beta.size() != ast.parameter_count())
        throw DimensionError("model has " + std::to_string(ast.parameter_count()) +
                             " parameters, got " + std::to_string(beta.size()));
    if (x.size() != ast.covariate_names().size())
        throw DimensionError("model declares " + std::to_string(ast.covariate_names().size()) +
                             " covariates, row has " + std::to_string(x.size()));
}

}  // namespace

double eval_value(const ExprAST& ast, std::span<const double> x, std::span<const double> beta) {
    check_inputs(ast, x, beta);
    return evaluate(ast, ValueOps{}, [&](const ExprNode& node) {
        return node.kind == NodeKind::parameter ? beta[node.index] : x[node.index];
    });
}

Dual2 eval_dual2(const ExprAST& ast, std::span<const double> x, std::span<const double> beta,
                 std::optional<std::size_t> wrt_covariate) {
    check_inputs(ast, x, beta);
    const std::size_t p = beta.size();
    if (wrt_covariate && *wrt_covariate >= x.size())
        throw DimensionError("eval_dual2: covariate index out of range");
    const std::size_t dim = p + (wrt_covariate ? 1 : 0);
    const DualOps ops{dim};
    return evaluate(ast, ops, [&](const ExprNode& node) {
        if (node.kind == NodeKind::parameter) return Dual2::variable(beta[node.index], dim, node.index);
        if (wrt_covariate && node.index == *wrt_covariate)
            return Dual2::variable(x[node.index], dim, p);
        return Dual2(x[node.index], dim);
    });
}

DesignBundle build_design(const ExprAST& ast, const Dataset& data, std::span<const double> beta,
                          RankCheck check) {
    const std::size_t n = data.n();
    const std::size_t p = ast.parameter_count();
    if (check == RankCheck::enforce && n < p)
        throw DimensionError("build_design: n = " + std::to_string(n) + " < p = " + std::to_string(p));
    DesignBundle out{Vector(n), DenseMatrix(n, p), std::vector<DenseMatrix>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        Dual2 d;
        try {
            d = eval_dual2(ast, data.x.row(i), beta);
        } catch (const EvaluationError& e) {
            throw e.at_row(i);
        }
        out.mu[i] = d.value;
        for (std::size_t k = 0; k < p; ++k) out.d(i, k) = d.grad[k];
        out.g[i] = std::move(d.hess);
    }
    if (check == RankCheck::enforce) {
        const std::size_t bad = qr_first_deficient_column(out.d, 1e-10);
        if (bad != p)
            throw SingularError("singular design at current beta: column b" + std::to_string(bad + 1) +
                                    " of D is numerically dependent",
                                bad);
    }
    return out;
}

Vector mean_values(const ExprAST& ast, const Dataset& data, std::span<const double> beta) {
    Vector mu(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        try {
            mu[i] = eval_value(ast, data.x.row(i), beta);
        } catch (const EvaluationError& e) {
            throw e.at_row(i);
        }
    }
    return mu;
}

}  // namespace bsdiag
