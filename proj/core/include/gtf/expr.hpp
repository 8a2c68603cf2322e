#pragma once

#include <memory>
#include <span>
#include <string>

namespace gtf {

/// Evaluation context for an Expr. `state` holds x1..xn (or z1..zk), and
/// time enters only through the two precomputed periodic atoms.
struct EvalContext {
    std::span<const double> state;
    double control = 0.0;  // u or v
    double sin_t = 0.0;    // sin(2*pi*t/T)
    double cos_t = 1.0;    // cos(2*pi*t/T)
};

/// Immutable AST over the T-periodic expression grammar. There is no raw
/// time symbol: periodicity holds by construction.
class Expr {
  public:
    enum class Op {
        Const,
        State,    // x<i> or z<i>, 1-based index
        Control,  // u or v
        SinT,
        CosT,
        Add,
        Sub,
        Mul,
        Pow,  // integer exponent
        Neg,
        Sin,
        Cos,
        Tanh,
    };

    using Ptr = std::shared_ptr<const Expr>;

    Op op;
    double constant = 0.0;
    int index = 0;  // state index or integer exponent
    Ptr lhs, rhs;
    std::size_t pos = 0;  // byte offset in the source text

    double eval(const EvalContext& ctx) const;

    /// Highest state index referenced (0 if none).
    int max_state_index() const;
    bool references_control() const;

    /// Canonical fully parenthesized form; parses back to an equal tree.
    std::string print() const;

    /// Replaces x<i> by (x<i> + shift[i-1]) and u by (u + control_shift);
    /// used to move the equilibrium to the origin.
    Ptr shifted(std::span<const double> shift, double control_shift) const;

    static Ptr constant_expr(double v);
};

/// Recursive-descent parser for the grammar. Throws SyntaxError with byte
/// offset, or UnknownSymbol for identifiers outside the alphabet.
Expr::Ptr parse_dynamics(const std::string& text);

}  // namespace gtf
