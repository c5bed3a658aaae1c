#include "esdlab/expr.hpp"

#include "esdlab/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <utility>

namespace esdlab::expr {

struct Expression::Node {
    enum class Kind { Constant, Variable, Neg, Add, Sub, Mul, Div, PowInt, Call };
    Kind kind;
    double value = 0.0;        // Constant
    Var var = Var::X;          // Variable
    int exponent = 0;          // PowInt
    Func func = Func::Exp;     // Call
    std::shared_ptr<const Node> a, b;
};

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

namespace {

NodePtr make_const(double c) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Constant;
    n->value = c;
    return n;
}
NodePtr make_var(Var v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Variable;
    n->var = v;
    return n;
}
NodePtr make_unary(Node::Kind k, NodePtr a) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    return n;
}
NodePtr make_binary(Node::Kind k, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}
NodePtr make_pow(NodePtr a, int k) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::PowInt;
    n->a = std::move(a);
    n->exponent = k;
    return n;
}
NodePtr make_call(Func f, NodePtr a) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Call;
    n->func = f;
    n->a = std::move(a);
    return n;
}

} // namespace

Expression wrap(NodePtr n) { return Expression(std::move(n)); }

NodePtr root_owned(const Expression& e) { return e.root_ ? e.root_ : nullptr; }

Expression Expression::constant(double c) { return wrap(make_const(c)); }
Expression Expression::variable(Var v) { return wrap(make_var(v)); }

Expression operator-(const Expression& e) {
    return wrap(make_unary(Node::Kind::Neg, e.root_));
}
Expression operator+(const Expression& a, const Expression& b) {
    return wrap(make_binary(Node::Kind::Add, a.root_, b.root_));
}
Expression operator-(const Expression& a, const Expression& b) {
    return wrap(make_binary(Node::Kind::Sub, a.root_, b.root_));
}
Expression operator*(const Expression& a, const Expression& b) {
    return wrap(make_binary(Node::Kind::Mul, a.root_, b.root_));
}
Expression operator/(const Expression& a, const Expression& b) {
    return wrap(make_binary(Node::Kind::Div, a.root_, b.root_));
}
Expression Expression::pow(int k) const { return wrap(make_pow(root_, k)); }
Expression Expression::apply(Func f) const { return wrap(make_call(f, root_)); }

const char* var_name(Var v) {
    switch (v) {
        case Var::X: return "x";
        case Var::S: return "S";
        case Var::Rho: return "rho";
    }
    return "?";
}

const char* func_name(Func f) {
    switch (f) {
        case Func::Exp: return "exp";
        case Func::Log: return "log";
        case Func::Sqrt: return "sqrt";
        case Func::Abs: return "abs";
        case Func::Sin: return "sin";
        case Func::Cos: return "cos";
        case Func::Tanh: return "tanh";
    }
    return "?";
}

ParseError::ParseError(std::size_t off, std::string message, std::string tok)
    : std::runtime_error("parse error at byte " + std::to_string(off) + ": " + message +
                         (tok.empty() ? std::string() : " (near '" + tok + "')")),
      offset(off),
      token(std::move(tok)) {}

double Bindings::get(Var v) const {
    const std::optional<double>* slot = nullptr;
    switch (v) {
        case Var::X: slot = &x; break;
        case Var::S: slot = &S; break;
        case Var::Rho: slot = &rho; break;
    }
    if (!slot->has_value())
        throw EvalError(std::string("unbound variable '") + var_name(v) + "'");
    return **slot;
}

// ---------------------------------------------------------------------------
// Recursive-descent parser. Precedence: ^  >  unary -  >  * /  >  + -, with
// left associativity for the binary operators and integer-literal exponents.

namespace {

struct Parser {
    const std::string& src;
    std::size_t pos = 0;

    explicit Parser(const std::string& s) : src(s) {}

    void skip_ws() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    bool at_end() {
        skip_ws();
        return pos >= src.size();
    }

    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }

    bool accept(char c) {
        skip_ws();
        if (pos < src.size() && src[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(std::size_t at, const std::string& msg, std::string tok = {}) {
        throw ParseError(at, msg, std::move(tok));
    }

    NodePtr parse_expression() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                lhs = make_binary(Node::Kind::Add, lhs, parse_term());
            } else if (accept('-')) {
                lhs = make_binary(Node::Kind::Sub, lhs, parse_term());
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                lhs = make_binary(Node::Kind::Mul, lhs, parse_unary());
            } else if (accept('/')) {
                lhs = make_binary(Node::Kind::Div, lhs, parse_unary());
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return make_unary(Node::Kind::Neg, parse_unary());
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        while (accept('^')) base = make_pow(base, parse_int_exponent());
        return base;
    }

    int parse_int_exponent() {
        skip_ws();
        const std::size_t start = pos;
        bool negative = false;
        if (pos < src.size() && src[pos] == '-') {
            negative = true;
            ++pos;
        }
        const auto [value, text] = read_number(start);
        if (value != std::floor(value) || std::fabs(value) > 1e9)
            fail(start, "exponent must be an integer literal", text);
        const int k = static_cast<int>(value);
        return negative ? -k : k;
    }

    std::pair<double, std::string> read_number(std::size_t err_at) {
        skip_ws();
        const std::size_t start = pos;
        while (pos < src.size() &&
               (std::isdigit(static_cast<unsigned char>(src[pos])) || src[pos] == '.'))
            ++pos;
        if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
            std::size_t p = pos + 1;
            if (p < src.size() && (src[p] == '+' || src[p] == '-')) ++p;
            if (p < src.size() && std::isdigit(static_cast<unsigned char>(src[p]))) {
                pos = p;
                while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos])))
                    ++pos;
            }
        }
        const std::string text = src.substr(start, pos - start);
        double value = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
        if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
            fail(err_at, "malformed number", text);
        return {value, text};
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos >= src.size()) fail(pos, "unexpected end of input");
        const char c = src[pos];
        if (c == '(') {
            const std::size_t open = pos;
            ++pos;
            NodePtr inner = parse_expression();
            if (!accept(')')) fail(open, "unbalanced parenthesis");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const auto [value, text] = read_number(pos);
            (void)text;
            return make_const(value);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos;
            while (pos < src.size() && (std::isalnum(static_cast<unsigned char>(src[pos])) ||
                                        src[pos] == '_'))
                ++pos;
            const std::string name = src.substr(start, pos - start);
            if (name == "x") return make_var(Var::X);
            if (name == "S") return make_var(Var::S);
            if (name == "rho") return make_var(Var::Rho);
            static const std::pair<const char*, Func> funcs[] = {
                {"exp", Func::Exp}, {"log", Func::Log},   {"sqrt", Func::Sqrt},
                {"abs", Func::Abs}, {"sin", Func::Sin},   {"cos", Func::Cos},
                {"tanh", Func::Tanh},
            };
            for (const auto& [fname, f] : funcs) {
                if (name == fname) {
                    if (!accept('(')) fail(start, "expected '(' after function name", name);
                    NodePtr arg = parse_expression();
                    if (!accept(')')) fail(start, "unbalanced parenthesis in call", name);
                    return make_call(f, arg);
                }
            }
            fail(start, "unknown identifier; variables are x, S, rho", name);
        }
        fail(pos, "unexpected character", std::string(1, c));
    }
};

} // namespace

Expression parse(const std::string& text) {
    Parser p(text);
    if (p.at_end()) throw ParseError(0, "empty input", "");
    NodePtr root = p.parse_expression();
    if (!p.at_end())
        throw ParseError(p.pos, "trailing input", std::string(1, p.src[p.pos]));
    return wrap(std::move(root));
}

// ---------------------------------------------------------------------------
// Printing with minimal parentheses; the printed form re-parses to an
// evaluation-equivalent tree.

namespace {

int precedence(const Node* n) {
    switch (n->kind) {
        case Node::Kind::Add:
        case Node::Kind::Sub: return 1;
        case Node::Kind::Mul:
        case Node::Kind::Div: return 2;
        case Node::Kind::Neg: return 3;
        case Node::Kind::PowInt: return 4;
        default: return 5;
    }
}

void print_node(const Node* n, std::string& out);

void print_child(const Node* child, int parent_prec, bool is_right, std::string& out) {
    const int cp = precedence(child);
    bool need = cp < parent_prec || (cp == parent_prec && is_right);
    // negative constants act like unary minus when embedded
    if (child->kind == Node::Kind::Constant && child->value < 0 && parent_prec >= 2)
        need = true;
    if (need) out += '(';
    print_node(child, out);
    if (need) out += ')';
}

std::string format_constant(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void print_node(const Node* n, std::string& out) {
    switch (n->kind) {
        case Node::Kind::Constant:
            out += format_constant(n->value);
            return;
        case Node::Kind::Variable:
            out += var_name(n->var);
            return;
        case Node::Kind::Neg:
            out += '-';
            print_child(n->a.get(), 3, true, out);
            return;
        case Node::Kind::Add:
            print_child(n->a.get(), 1, false, out);
            out += '+';
            print_child(n->b.get(), 1, true, out);
            return;
        case Node::Kind::Sub:
            print_child(n->a.get(), 1, false, out);
            out += '-';
            print_child(n->b.get(), 1, true, out);
            return;
        case Node::Kind::Mul:
            print_child(n->a.get(), 2, false, out);
            out += '*';
            print_child(n->b.get(), 2, true, out);
            return;
        case Node::Kind::Div:
            print_child(n->a.get(), 2, false, out);
            out += '/';
            print_child(n->b.get(), 2, true, out);
            return;
        case Node::Kind::PowInt:
            print_child(n->a.get(), 4, false, out);
            out += '^';
            out += std::to_string(n->exponent);
            return;
        case Node::Kind::Call:
            out += func_name(n->func);
            out += '(';
            print_node(n->a.get(), out);
            out += ')';
            return;
    }
}

} // namespace

std::string to_string(const Expression& e) {
    std::string out;
    if (e.root()) print_node(e.root(), out);
    return out;
}

// ---------------------------------------------------------------------------
// Point evaluation with strict domain checks.

namespace {

double eval_node(const Node* n, const Bindings& b) {
    switch (n->kind) {
        case Node::Kind::Constant: return n->value;
        case Node::Kind::Variable: return b.get(n->var);
        case Node::Kind::Neg: return -eval_node(n->a.get(), b);
        case Node::Kind::Add: return eval_node(n->a.get(), b) + eval_node(n->b.get(), b);
        case Node::Kind::Sub: return eval_node(n->a.get(), b) - eval_node(n->b.get(), b);
        case Node::Kind::Mul: return eval_node(n->a.get(), b) * eval_node(n->b.get(), b);
        case Node::Kind::Div: {
            const double num = eval_node(n->a.get(), b);
            const double den = eval_node(n->b.get(), b);
            if (den == 0.0) throw EvalError("division by zero");
            return num / den;
        }
        case Node::Kind::PowInt: {
            const double base = eval_node(n->a.get(), b);
            if (base == 0.0 && n->exponent < 0)
                throw EvalError("zero raised to a negative exponent");
            double r = 1.0, p = base;
            unsigned k = n->exponent < 0
                             ? static_cast<unsigned>(-static_cast<long long>(n->exponent))
                             : static_cast<unsigned>(n->exponent);
            while (k) {
                if (k & 1u) r *= p;
                k >>= 1u;
                if (k) p *= p;
            }
            return n->exponent < 0 ? 1.0 / r : r;
        }
        case Node::Kind::Call: {
            const double v = eval_node(n->a.get(), b);
            switch (n->func) {
                case Func::Exp: return std::exp(v);
                case Func::Log:
                    if (v <= 0.0) throw EvalError("log of a non-positive value");
                    return std::log(v);
                case Func::Sqrt:
                    if (v < 0.0) throw EvalError("sqrt of a negative value");
                    return std::sqrt(v);
                case Func::Abs: return std::fabs(v);
                case Func::Sin: return std::sin(v);
                case Func::Cos: return std::cos(v);
                case Func::Tanh: return std::tanh(v);
            }
            throw EvalError("unknown function");
        }
    }
    throw EvalError("corrupt expression node");
}

} // namespace

double evaluate(const Expression& e, const Bindings& b) {
    if (!e.root()) throw EvalError("empty expression");
    return eval_node(e.root(), b);
}

// ---------------------------------------------------------------------------
// Symbolic differentiation. Total on the grammar; results are run through the
// conservative simplifier.

namespace {

bool is_const(const NodePtr& n, double v) {
    return n->kind == Node::Kind::Constant && n->value == v;
}

NodePtr simp(const NodePtr& n);

NodePtr simp_binary(Node::Kind k, NodePtr a, NodePtr b) {
    if (a->kind == Node::Kind::Constant && b->kind == Node::Kind::Constant) {
        switch (k) {
            case Node::Kind::Add: return make_const(a->value + b->value);
            case Node::Kind::Sub: return make_const(a->value - b->value);
            case Node::Kind::Mul: return make_const(a->value * b->value);
            case Node::Kind::Div:
                if (b->value != 0.0) return make_const(a->value / b->value);
                break;
            default: break;
        }
    }
    switch (k) {
        case Node::Kind::Add:
            if (is_const(a, 0.0)) return b;
            if (is_const(b, 0.0)) return a;
            break;
        case Node::Kind::Sub:
            if (is_const(b, 0.0)) return a;
            if (is_const(a, 0.0)) return simp(make_unary(Node::Kind::Neg, b));
            break;
        case Node::Kind::Mul:
            if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
            if (is_const(a, 1.0)) return b;
            if (is_const(b, 1.0)) return a;
            break;
        case Node::Kind::Div:
            if (is_const(a, 0.0)) return make_const(0.0);
            if (is_const(b, 1.0)) return a;
            break;
        default: break;
    }
    return make_binary(k, std::move(a), std::move(b));
}

NodePtr simp(const NodePtr& n) {
    switch (n->kind) {
        case Node::Kind::Constant:
        case Node::Kind::Variable: return n;
        case Node::Kind::Neg: {
            NodePtr a = simp(n->a);
            if (a->kind == Node::Kind::Constant) return make_const(-a->value);
            if (a->kind == Node::Kind::Neg) return a->a;
            return make_unary(Node::Kind::Neg, std::move(a));
        }
        case Node::Kind::Add:
        case Node::Kind::Sub:
        case Node::Kind::Mul:
        case Node::Kind::Div: return simp_binary(n->kind, simp(n->a), simp(n->b));
        case Node::Kind::PowInt: {
            NodePtr a = simp(n->a);
            if (n->exponent == 0) return make_const(1.0);
            if (n->exponent == 1) return a;
            if (a->kind == Node::Kind::Constant) {
                const double v = std::pow(a->value, n->exponent);
                if (std::isfinite(v)) return make_const(v);
            }
            return make_pow(std::move(a), n->exponent);
        }
        case Node::Kind::Call: {
            NodePtr a = simp(n->a);
            return make_call(n->func, std::move(a));
        }
    }
    return n;
}

NodePtr diff_node(const NodePtr& n, Var v) {
    switch (n->kind) {
        case Node::Kind::Constant: return make_const(0.0);
        case Node::Kind::Variable: return make_const(n->var == v ? 1.0 : 0.0);
        case Node::Kind::Neg: return make_unary(Node::Kind::Neg, diff_node(n->a, v));
        case Node::Kind::Add:
            return make_binary(Node::Kind::Add, diff_node(n->a, v), diff_node(n->b, v));
        case Node::Kind::Sub:
            return make_binary(Node::Kind::Sub, diff_node(n->a, v), diff_node(n->b, v));
        case Node::Kind::Mul:
            return make_binary(Node::Kind::Add,
                               make_binary(Node::Kind::Mul, diff_node(n->a, v), n->b),
                               make_binary(Node::Kind::Mul, n->a, diff_node(n->b, v)));
        case Node::Kind::Div:
            // (a'b - ab') / b^2
            return make_binary(
                Node::Kind::Div,
                make_binary(Node::Kind::Sub,
                            make_binary(Node::Kind::Mul, diff_node(n->a, v), n->b),
                            make_binary(Node::Kind::Mul, n->a, diff_node(n->b, v))),
                make_pow(n->b, 2));
        case Node::Kind::PowInt: {
            // k * a^(k-1) * a'
            if (n->exponent == 0) return make_const(0.0);
            return make_binary(
                Node::Kind::Mul,
                make_binary(Node::Kind::Mul, make_const(n->exponent),
                            make_pow(n->a, n->exponent - 1)),
                diff_node(n->a, v));
        }
        case Node::Kind::Call: {
            NodePtr inner = diff_node(n->a, v);
            NodePtr outer;
            switch (n->func) {
                case Func::Exp: outer = make_call(Func::Exp, n->a); break;
                case Func::Log: outer = make_binary(Node::Kind::Div, make_const(1.0), n->a); break;
                case Func::Sqrt:
                    outer = make_binary(Node::Kind::Div, make_const(0.5),
                                        make_call(Func::Sqrt, n->a));
                    break;
                case Func::Abs:
                    // sign(a) expressed as a/|a|; differentiable away from 0
                    outer = make_binary(Node::Kind::Div, n->a, make_call(Func::Abs, n->a));
                    break;
                case Func::Sin: outer = make_call(Func::Cos, n->a); break;
                case Func::Cos:
                    outer = make_unary(Node::Kind::Neg, make_call(Func::Sin, n->a));
                    break;
                case Func::Tanh:
                    outer = make_binary(Node::Kind::Sub, make_const(1.0),
                                        make_pow(make_call(Func::Tanh, n->a), 2));
                    break;
            }
            return make_binary(Node::Kind::Mul, std::move(outer), std::move(inner));
        }
    }
    return make_const(0.0);
}

} // namespace

Expression differentiate(const Expression& e, Var v) {
    if (!e.root()) throw EvalError("empty expression");
    return wrap(simp(diff_node(root_owned(e), v)));
}

Expression simplify(const Expression& e) {
    if (!e.root()) return e;
    return wrap(simp(root_owned(e)));
}

namespace {
bool uses_var_node(const Node* n, Var v) {
    if (!n) return false;
    switch (n->kind) {
        case Node::Kind::Constant: return false;
        case Node::Kind::Variable: return n->var == v;
        case Node::Kind::Neg:
        case Node::Kind::PowInt:
        case Node::Kind::Call: return uses_var_node(n->a.get(), v);
        default:
            return uses_var_node(n->a.get(), v) || uses_var_node(n->b.get(), v);
    }
}
} // namespace

bool uses_variable(const Expression& e, Var v) { return uses_var_node(e.root(), v); }

// ---------------------------------------------------------------------------
// Compiled batch evaluation.

std::span<double> Workspace::buffer(std::size_t index, std::size_t n) {
    if (bufs_.size() <= index) bufs_.resize(index + 1);
    if (bufs_[index].size() < n) bufs_[index].resize(n);
    return {bufs_[index].data(), n};
}

CompiledExpr::CompiledExpr(const Expression& e) {
    if (!e.root()) throw EvalError("empty expression");
    emit(e.root());
    std::size_t depth = 0;
    for (const Instr& in : prog_) {
        switch (in.op) {
            case Op::PushConst:
            case Op::PushX:
            case Op::PushS:
            case Op::PushRho: ++depth; break;
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div: --depth; break;
            default: break;
        }
        max_stack_ = std::max(max_stack_, depth);
    }
    uses_x_ = false;
    for (const Instr& in : prog_)
        if (in.op == Op::PushX) uses_x_ = true;
}

void CompiledExpr::emit(const Expression::Node* n) {
    switch (n->kind) {
        case Node::Kind::Constant: prog_.push_back({Op::PushConst, 0, n->value}); return;
        case Node::Kind::Variable:
            switch (n->var) {
                case Var::X: prog_.push_back({Op::PushX}); return;
                case Var::S: prog_.push_back({Op::PushS}); return;
                case Var::Rho: prog_.push_back({Op::PushRho}); return;
            }
            return;
        case Node::Kind::Neg:
            emit(n->a.get());
            prog_.push_back({Op::Neg});
            return;
        case Node::Kind::Add:
        case Node::Kind::Sub:
        case Node::Kind::Mul:
        case Node::Kind::Div:
            emit(n->a.get());
            emit(n->b.get());
            prog_.push_back({n->kind == Node::Kind::Add   ? Op::Add
                             : n->kind == Node::Kind::Sub ? Op::Sub
                             : n->kind == Node::Kind::Mul ? Op::Mul
                                                          : Op::Div});
            return;
        case Node::Kind::PowInt:
            emit(n->a.get());
            prog_.push_back({Op::PowI, n->exponent});
            return;
        case Node::Kind::Call:
            emit(n->a.get());
            switch (n->func) {
                case Func::Exp: prog_.push_back({Op::Exp}); break;
                case Func::Log: prog_.push_back({Op::Log}); break;
                case Func::Sqrt: prog_.push_back({Op::Sqrt}); break;
                case Func::Abs: prog_.push_back({Op::Abs}); break;
                case Func::Sin: prog_.push_back({Op::Sin}); break;
                case Func::Cos: prog_.push_back({Op::Cos}); break;
                case Func::Tanh: prog_.push_back({Op::Tanh}); break;
            }
            return;
    }
}

namespace {

// Stack slot: either a scalar (constants, S, rho and anything derived only
// from them) or an index into the workspace buffer pool.
struct Slot {
    bool is_scalar;
    double s;
    int buf;
};

inline double scalar_powi(double x, int k) {
    const bool inv = k < 0;
    unsigned e = inv ? static_cast<unsigned>(-static_cast<long long>(k))
                     : static_cast<unsigned>(k);
    double r = 1.0, p = x;
    while (e) {
        if (e & 1u) r *= p;
        e >>= 1u;
        if (e) p *= p;
    }
    return inv ? 1.0 / r : r;
}

} // namespace

void CompiledExpr::eval(std::span<const double> x, double S, double rho,
                        std::span<double> out, Workspace& ws) const {
    const auto& k = kernels::active();
    const std::size_t n = x.size();
    std::vector<Slot> stack;
    stack.reserve(max_stack_ + 1);
    int next_buf = 0;
    std::vector<int> free_bufs;

    auto alloc = [&]() -> int {
        if (!free_bufs.empty()) {
            const int b = free_bufs.back();
            free_bufs.pop_back();
            return b;
        }
        return next_buf++;
    };
    auto release = [&](const Slot& s) {
        if (!s.is_scalar) free_bufs.push_back(s.buf);
    };
    auto data = [&](const Slot& s) { return ws.buffer(static_cast<std::size_t>(s.buf), n); };

    for (const Instr& in : prog_) {
        switch (in.op) {
            case Op::PushConst: stack.push_back({true, in.carg, -1}); break;
            case Op::PushS: stack.push_back({true, S, -1}); break;
            case Op::PushRho: stack.push_back({true, rho, -1}); break;
            case Op::PushX: {
                const int b = alloc();
                auto dst = ws.buffer(static_cast<std::size_t>(b), n);
                std::copy(x.begin(), x.end(), dst.begin());
                stack.push_back({false, 0.0, b});
                break;
            }
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div: {
                Slot b = stack.back();
                stack.pop_back();
                Slot a = stack.back();
                stack.pop_back();
                if (a.is_scalar && b.is_scalar) {
                    double r = 0.0;
                    switch (in.op) {
                        case Op::Add: r = a.s + b.s; break;
                        case Op::Sub: r = a.s - b.s; break;
                        case Op::Mul: r = a.s * b.s; break;
                        default: r = a.s / b.s; break;
                    }
                    stack.push_back({true, r, -1});
                    break;
                }
                Slot dst = a.is_scalar ? b : a;
                auto od = data(dst);
                if (!a.is_scalar && !b.is_scalar) {
                    auto ad = data(a), bd = data(b);
                    switch (in.op) {
                        case Op::Add: k.add(ad.data(), bd.data(), od.data(), n); break;
                        case Op::Sub: k.sub(ad.data(), bd.data(), od.data(), n); break;
                        case Op::Mul: k.mul(ad.data(), bd.data(), od.data(), n); break;
                        default: k.div(ad.data(), bd.data(), od.data(), n); break;
                    }
                    release(b);
                } else if (a.is_scalar) {
                    auto bd = data(b);
                    switch (in.op) {
                        case Op::Add: k.add_scalar(bd.data(), a.s, od.data(), n); break;
                        case Op::Sub: k.sub_scalar_rev(a.s, bd.data(), od.data(), n); break;
                        case Op::Mul: k.mul_scalar(bd.data(), a.s, od.data(), n); break;
                        default: k.div_scalar_rev(a.s, bd.data(), od.data(), n); break;
                    }
                } else {
                    auto ad = data(a);
                    switch (in.op) {
                        case Op::Add: k.add_scalar(ad.data(), b.s, od.data(), n); break;
                        case Op::Sub: k.add_scalar(ad.data(), -b.s, od.data(), n); break;
                        case Op::Mul: k.mul_scalar(ad.data(), b.s, od.data(), n); break;
                        default: k.div_scalar(ad.data(), b.s, od.data(), n); break;
                    }
                }
                stack.push_back(dst);
                break;
            }
            case Op::Neg:
            case Op::PowI:
            case Op::Exp:
            case Op::Log:
            case Op::Sqrt:
            case Op::Abs:
            case Op::Sin:
            case Op::Cos:
            case Op::Tanh: {
                Slot a = stack.back();
                stack.pop_back();
                if (a.is_scalar) {
                    double r = 0.0;
                    switch (in.op) {
                        case Op::Neg: r = -a.s; break;
                        case Op::PowI: r = scalar_powi(a.s, in.iarg); break;
                        case Op::Exp: r = std::exp(a.s); break;
                        case Op::Log: r = std::log(a.s); break;
                        case Op::Sqrt: r = std::sqrt(a.s); break;
                        case Op::Abs: r = std::fabs(a.s); break;
                        case Op::Sin: r = std::sin(a.s); break;
                        case Op::Cos: r = std::cos(a.s); break;
                        default: r = std::tanh(a.s); break;
                    }
                    stack.push_back({true, r, -1});
                    break;
                }
                auto ad = data(a);
                switch (in.op) {
                    case Op::Neg: k.neg(ad.data(), ad.data(), n); break;
                    case Op::PowI: k.powi(ad.data(), in.iarg, ad.data(), n); break;
                    case Op::Exp: kernels::exp_array(ad.data(), ad.data(), n); break;
                    case Op::Log: kernels::log_array(ad.data(), ad.data(), n); break;
                    case Op::Sqrt: k.sqrt(ad.data(), ad.data(), n); break;
                    case Op::Abs: k.abs(ad.data(), ad.data(), n); break;
                    case Op::Sin: kernels::sin_array(ad.data(), ad.data(), n); break;
                    case Op::Cos: kernels::cos_array(ad.data(), ad.data(), n); break;
                    default: kernels::tanh_array(ad.data(), ad.data(), n); break;
                }
                stack.push_back(a);
                break;
            }
        }
    }

    const Slot res = stack.back();
    if (res.is_scalar) {
        std::fill(out.begin(), out.end(), res.s);
    } else {
        auto rd = data(res);
        std::copy(rd.begin(), rd.end(), out.begin());
    }
}

} // namespace esdlab::expr
