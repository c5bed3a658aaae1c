#pragma once
// Arithmetic expressions over the variables {x, S, rho}: parsing, printing,
// point evaluation, exact symbolic differentiation and a compiled form that
// evaluates over a whole trait grid through the kernel backends.
//
// Expressions are immutable after construction and cheap to copy; sharing
// them across threads is safe.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace esdlab::expr {

enum class Var { X, S, Rho };

enum class Func { Exp, Log, Sqrt, Abs, Sin, Cos, Tanh };

const char* var_name(Var v);
const char* func_name(Func f);

/// Parse failure, carrying the 0-based byte offset into the input.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, std::string message, std::string token);
    std::size_t offset;
    std::string token;
};

/// Evaluation failure: unbound variable or a domain error (log/sqrt of a
/// negative number, division by zero). Never silently produces NaN.
class EvalError : public std::runtime_error {
public:
    explicit EvalError(const std::string& message) : std::runtime_error(message) {}
};

struct Bindings {
    std::optional<double> x, S, rho;
    double get(Var v) const;
    static Bindings at(std::optional<double> x, std::optional<double> S,
                       std::optional<double> rho) {
        return Bindings{x, S, rho};
    }
};

class Expression {
public:
    Expression() = default; // empty; only assignable

    static Expression constant(double c);
    static Expression variable(Var v);

    bool empty() const { return root_ == nullptr; }

    friend Expression operator-(const Expression& e);
    friend Expression operator+(const Expression& a, const Expression& b);
    friend Expression operator-(const Expression& a, const Expression& b);
    friend Expression operator*(const Expression& a, const Expression& b);
    friend Expression operator/(const Expression& a, const Expression& b);
    Expression pow(int k) const;
    Expression apply(Func f) const;

    struct Node;
    const Node* root() const { return root_.get(); }

private:
    explicit Expression(std::shared_ptr<const Node> n) : root_(std::move(n)) {}
    std::shared_ptr<const Node> root_;
    friend Expression wrap(std::shared_ptr<const Node>);
    friend std::shared_ptr<const Node> root_owned(const Expression&);
};

Expression parse(const std::string& text);
std::string to_string(const Expression& e);
double evaluate(const Expression& e, const Bindings& b);
Expression differentiate(const Expression& e, Var v);

/// Constant folding and identity elimination (0+e, 1*e, e^1, ...); preserves
/// evaluation semantics, does not canonicalize.
Expression simplify(const Expression& e);

bool uses_variable(const Expression& e, Var v);

// ---------------------------------------------------------------------------
// Batch evaluation over a grid of x values at fixed (S, rho).

class Workspace {
public:
    std::span<double> buffer(std::size_t index, std::size_t n);

private:
    std::vector<std::vector<double>> bufs_;
};

class CompiledExpr {
public:
    CompiledExpr() = default;
    explicit CompiledExpr(const Expression& e);

    /// out[i] = e(x[i], S, rho). Unlike point evaluation this path does not
    /// check math domains; the solver aborts on non-finite state instead.
    void eval(std::span<const double> x, double S, double rho, std::span<double> out,
              Workspace& ws) const;

    bool uses_x() const { return uses_x_; }

private:
    enum class Op : unsigned char {
        PushConst, PushX, PushS, PushRho,
        Neg, Add, Sub, Mul, Div, PowI,
        Exp, Log, Sqrt, Abs, Sin, Cos, Tanh,
    };
    struct Instr {
        Op op;
        int iarg = 0;
        double carg = 0.0;
    };
    std::vector<Instr> prog_;
    bool uses_x_ = false;
    std::size_t max_stack_ = 0;

    void emit(const Expression::Node* n);
};

} // namespace esdlab::expr
