#include "bsdiag/errors.hpp"
#include "bsdiag/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <utility>

namespace bsdiag {

// --- Dataset -------------------------------------------------------------

Dataset::Dataset(Vector y_in, std::vector<std::string> names, DenseMatrix x_in)
    : y(std::move(y_in)), covariate_names(std::move(names)), x(std::move(x_in)) {
    if (x.rows() != y.size() || x.cols() != covariate_names.size()) {
        throw DimensionError("Dataset: covariate table is " + std::to_string(x.rows()) + "x" +
                             std::to_string(x.cols()) + ", expected " + std::to_string(y.size()) +
                             "x" + std::to_string(covariate_names.size()));
    }
}

std::optional<std::size_t> Dataset::covariate_index(std::string_view name) const {
    const auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - covariate_names.begin());
}

Dataset Dataset::without_row(std::size_t i) const {
    if (i >= n()) throw DimensionError("without_row: index out of range");
    Vector y2;
    Vector x2;
    for (std::size_t r = 0; r < n(); ++r) {
        if (r == i) continue;
        y2.push_back(y[r]);
        const auto row = x.row(r);
        x2.insert(x2.end(), row.begin(), row.end());
    }
    return {std::move(y2), covariate_names, DenseMatrix(n() - 1, m(), std::move(x2))};
}

// --- ExprAST -------------------------------------------------------------

ExprAST::ExprAST(std::vector<ExprNode> nodes, std::size_t parameter_count,
                 std::vector<std::string> covariate_names, std::string text)
    : nodes_(std::move(nodes)), p_(parameter_count), names_(std::move(covariate_names)),
      text_(std::move(text)) {
    if (nodes_.empty()) throw DomainError("ExprAST: empty expression");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const ExprNode& n = nodes_[i];
        if (n.kind == NodeKind::parameter && n.index >= p_)
            throw DomainError("ExprAST: parameter index out of range");
        if (n.kind == NodeKind::covariate && n.index >= names_.size())
            throw DomainError("ExprAST: covariate index out of range");
        const bool unary = n.kind == NodeKind::negate || n.kind == NodeKind::call;
        const bool binary = n.kind == NodeKind::add || n.kind == NodeKind::subtract ||
                            n.kind == NodeKind::multiply || n.kind == NodeKind::divide ||
                            n.kind == NodeKind::power;
        if ((unary || binary) && n.lhs >= i) throw DomainError("ExprAST: nodes not in post-order");
        if (binary && n.rhs >= i) throw DomainError("ExprAST: nodes not in post-order");
    }
}

bool ExprAST::references_covariate(std::size_t j) const {
    return std::any_of(nodes_.begin(), nodes_.end(), [j](const ExprNode& n) {
        return n.kind == NodeKind::covariate && n.index == j;
    });
}

bool ExprAST::references_parameter(std::size_t k) const {
    return std::any_of(nodes_.begin(), nodes_.end(), [k](const ExprNode& n) {
        return n.kind == NodeKind::parameter && n.index == k;
    });
}

namespace {

struct FunctionName {
    std::string_view name;
    Function function;
};

constexpr FunctionName kFunctions[] = {
    {"exp", Function::exp},   {"log", Function::log},   {"sqrt", Function::sqrt},
    {"sinh", Function::sinh}, {"cosh", Function::cosh}, {"tanh", Function::tanh},
    {"arcsinh", Function::arcsinh},
};

std::string_view function_name(Function f) {
    for (const auto& fn : kFunctions)
        if (fn.function == f) return fn.name;
    return "?";
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

// Returns the 1-based parameter number for identifiers of the form b<digits>.
std::optional<std::size_t> parameter_number(std::string_view ident) {
    if (ident.size() < 2 || ident[0] != 'b') return std::nullopt;
    std::size_t value = 0;
    const auto* first = ident.data() + 1;
    const auto* last = ident.data() + ident.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return value;
}

class Parser {
public:
    Parser(std::string_view text, const std::vector<std::string>& names, std::optional<std::size_t> p)
        : text_(text), names_(names), p_(p) {}

    std::vector<ExprNode> parse() {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("empty model expression", pos_);
        expr();
        skip_space();
        if (pos_ < text_.size()) {
            if (text_[pos_] == ',')
                throw ParseError("arity mismatch: functions take exactly one argument", pos_);
            throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
        }
        return std::move(nodes_);
    }

    std::size_t max_parameter() const { return max_param_; }

private:
    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::size_t push(ExprNode node) {
        nodes_.push_back(node);
        return nodes_.size() - 1;
    }

    std::size_t binary(NodeKind kind, std::size_t lhs, std::size_t rhs, std::size_t offset) {
        ExprNode n;
        n.kind = kind;
        n.lhs = lhs;
        n.rhs = rhs;
        n.offset = offset;
        n.data_free = nodes_[lhs].data_free && nodes_[rhs].data_free;
        return push(n);
    }

    std::size_t expr() {
        std::size_t lhs = term();
        for (;;) {
            skip_space();
            const std::size_t at = pos_;
            if (accept('+'))
                lhs = binary(NodeKind::add, lhs, term(), at);
            else if (accept('-'))
                lhs = binary(NodeKind::subtract, lhs, term(), at);
            else
                return lhs;
        }
    }

    std::size_t term() {
        std::size_t lhs = unary();
        for (;;) {
            skip_space();
            const std::size_t at = pos_;
            if (accept('*'))
                lhs = binary(NodeKind::multiply, lhs, unary(), at);
            else if (accept('/'))
                lhs = binary(NodeKind::divide, lhs, unary(), at);
            else
                return lhs;
        }
    }

    std::size_t unary() {
        skip_space();
        const std::size_t at = pos_;
        if (accept('-')) {
            const std::size_t operand = unary();
            ExprNode n;
            n.kind = NodeKind::negate;
            n.lhs = operand;
            n.offset = at;
            n.data_free = nodes_[operand].data_free;
            return push(n);
        }
        return power();
    }

    std::size_t power() {
        const std::size_t base = primary();
        skip_space();
        const std::size_t at = pos_;
        if (accept('^')) return binary(NodeKind::power, base, unary(), at);
        return base;
    }

    std::size_t primary() {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
        const std::size_t start = pos_;
        const char c = text_[pos_];

        if (c == '(') {
            ++pos_;
            const std::size_t inner = expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (is_ident_start(c)) return identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", start);
    }

    std::size_t number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
            if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
                pos_ = look;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            }
        }
        const std::string literal(text_.substr(start, pos_ - start));
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(literal.data(), literal.data() + literal.size(), value);
        if (ec != std::errc{} || ptr != literal.data() + literal.size())
            throw ParseError("malformed number '" + literal + "'", start);
        ExprNode n;
        n.kind = NodeKind::constant;
        n.value = value;
        n.offset = start;
        return push(n);
    }

    std::size_t identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
        const std::string_view ident = text_.substr(start, pos_ - start);

        skip_space();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            const auto fn = std::find_if(std::begin(kFunctions), std::end(kFunctions),
                                         [&](const FunctionName& f) { return f.name == ident; });
            if (fn == std::end(kFunctions))
                throw ParseError("unknown function '" + std::string(ident) + "'", start);
            ++pos_;
            skip_space();
            if (pos_ < text_.size() && text_[pos_] == ')')
                throw ParseError("arity mismatch: '" + std::string(ident) + "' takes one argument", pos_);
            const std::size_t arg = expr();
            skip_space();
            if (pos_ < text_.size() && text_[pos_] == ',')
                throw ParseError("arity mismatch: '" + std::string(ident) + "' takes one argument", pos_);
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            ExprNode n;
            n.kind = NodeKind::call;
            n.function = fn->function;
            n.lhs = arg;
            n.offset = start;
            n.data_free = nodes_[arg].data_free;
            return push(n);
        }

        if (const auto k = parameter_number(ident)) {
            if (*k == 0) throw ParseError("parameter indices start at b1", start);
            if (p_ && *k > *p_)
                throw ParseError("parameter index " + std::string(ident) + " exceeds p = " +
                                     std::to_string(*p_),
                                 start);
            max_param_ = std::max(max_param_, *k);
            ExprNode n;
            n.kind = NodeKind::parameter;
            n.index = *k - 1;
            n.offset = start;
            n.data_free = false;
            return push(n);
        }

        const auto it = std::find(names_.begin(), names_.end(), ident);
        if (it == names_.end())
            throw ParseError("unknown identifier '" + std::string(ident) + "'", start);
        ExprNode n;
        n.kind = NodeKind::covariate;
        n.index = static_cast<std::size_t>(it - names_.begin());
        n.offset = start;
        n.data_free = false;
        return push(n);
    }

    std::string_view text_;
    const std::vector<std::string>& names_;
    std::optional<std::size_t> p_;
    std::size_t pos_ = 0;
    std::size_t max_param_ = 0;
    std::vector<ExprNode> nodes_;
};

}  // namespace

ExprAST parse_model(std::string_view text, const std::vector<std::string>& covariate_names,
                    std::size_t p) {
    Parser parser(text, covariate_names, p);
    auto nodes = parser.parse();
    return {std::move(nodes), p, covariate_names, std::string(text)};
}

ExprAST parse_model(std::string_view text, const std::vector<std::string>& covariate_names) {
    Parser parser(text, covariate_names, std::nullopt);
    auto nodes = parser.parse();
    return {std::move(nodes), parser.max_parameter(), covariate_names, std::string(text)};
}

namespace {

void render(const ExprAST& ast, std::size_t i, std::string& out) {
    const ExprNode& n = ast.nodes()[i];
    auto infix = [&](const char* op) {
        out += '(';
        render(ast, n.lhs, out);
        out += op;
        render(ast, n.rhs, out);
        out += ')';
    };
    switch (n.kind) {
        case NodeKind::constant: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            out += buf;
            break;
        }
        case NodeKind::covariate: out += ast.covariate_names()[n.index]; break;
        case NodeKind::parameter: out += "b" + std::to_string(n.index + 1); break;
        case NodeKind::negate:
            out += "(-";
            render(ast, n.lhs, out);
            out += ')';
            break;
        case NodeKind::add: infix(" + "); break;
        case NodeKind::subtract: infix(" - "); break;
        case NodeKind::multiply: infix(" * "); break;
        case NodeKind::divide: infix(" / "); break;
        case NodeKind::power: infix(" ^ "); break;
        case NodeKind::call:
            out += function_name(n.function);
            out += '(';
            render(ast, n.lhs, out);
            out += ')';
            break;
    }
}

bool equal_subtree(const ExprAST& a, std::size_t i, const ExprAST& b, std::size_t j) {
    const ExprNode& x = a.nodes()[i];
    const ExprNode& y = b.nodes()[j];
    if (x.kind != y.kind) return false;
    switch (x.kind) {
        case NodeKind::constant: return x.value == y.value;
        case NodeKind::covariate:
            return a.covariate_names()[x.index] == b.covariate_names()[y.index];
        case NodeKind::parameter: return x.index == y.index;
        case NodeKind::negate: return equal_subtree(a, x.lhs, b, y.lhs);
        case NodeKind::call:
            return x.function == y.function && equal_subtree(a, x.lhs, b, y.lhs);
        default:
            return equal_subtree(a, x.lhs, b, y.lhs) && equal_subtree(a, x.rhs, b, y.rhs);
    }
}

}  // namespace

std::string pretty_print(const ExprAST& ast) {
    std::string out;
    render(ast, ast.nodes().size() - 1, out);
    return out;
}

bool structurally_equal(const ExprAST& a, const ExprAST& b) {
    return a.parameter_count() == b.parameter_count() &&
           equal_subtree(a, a.nodes().size() - 1, b, b.nodes().size() - 1);
}

std::string builtin_model_text(std::string_view name, const std::vector<std::string>& covariate_names) {
    auto first = [&]() -> const std::string& {
        if (covariate_names.empty())
            throw DomainError("builtin model '" + std::string(name) + "' needs at least one covariate");
        return covariate_names.front();
    };
    if (name == "linear") {
        std::string text = "b1";
        for (std::size_t j = 0; j < covariate_names.size(); ++j)
            text += " + b" + std::to_string(j + 2) + "*" + covariate_names[j];
        return text;
    }
    if (name == "exp-growth") return "b1 + b2*exp(b3*" + first() + ")";
    if (name == "michaelis-menten") return "b1*" + first() + "/(b2 + " + first() + ")";
    throw DomainError("unknown builtin model '" + std::string(name) +
                      "' (expected linear, exp-growth or michaelis-menten)");
}

}  // namespace bsdiag
