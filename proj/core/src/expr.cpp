#include "gtf/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "gtf/errors.hpp"

namespace gtf {

double Expr::eval(const EvalContext& ctx) const {
    switch (op) {
        case Op::Const: return constant;
        case Op::State:
            if (index < 1 || static_cast<std::size_t>(index) > ctx.state.size())
                throw DimensionMismatch("state symbol x" + std::to_string(index) +
                                        " outside state of dimension " +
                                        std::to_string(ctx.state.size()));
            return ctx.state[static_cast<std::size_t>(index - 1)];
        case Op::Control: return ctx.control;
        case Op::SinT: return ctx.sin_t;
        case Op::CosT: return ctx.cos_t;
        case Op::Add: return lhs->eval(ctx) + rhs->eval(ctx);
        case Op::Sub: return lhs->eval(ctx) - rhs->eval(ctx);
        case Op::Mul: return lhs->eval(ctx) * rhs->eval(ctx);
        case Op::Pow: {
            double base = lhs->eval(ctx);
            double r = 1.0;
            for (int i = 0; i < index; ++i) r *= base;
            return r;
        }
        case Op::Neg: return -lhs->eval(ctx);
        case Op::Sin: return std::sin(lhs->eval(ctx));
        case Op::Cos: return std::cos(lhs->eval(ctx));
        case Op::Tanh: return std::tanh(lhs->eval(ctx));
    }
    return 0.0;
}

int Expr::max_state_index() const {
    int m = (op == Op::State) ? index : 0;
    if (lhs) m = std::max(m, lhs->max_state_index());
    if (rhs) m = std::max(m, rhs->max_state_index());
    return m;
}

bool Expr::references_control() const {
    if (op == Op::Control) return true;
    if (lhs && lhs->references_control()) return true;
    return rhs && rhs->references_control();
}

std::string Expr::print() const {
    switch (op) {
        case Op::Const: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", constant);
            return buf;
        }
        case Op::State: return "x" + std::to_string(index);
        case Op::Control: return "u";
        case Op::SinT: return "sinT";
        case Op::CosT: return "cosT";
        case Op::Add: return "(" + lhs->print() + " + " + rhs->print() + ")";
        case Op::Sub: return "(" + lhs->print() + " - " + rhs->print() + ")";
        case Op::Mul: return "(" + lhs->print() + "*" + rhs->print() + ")";
        case Op::Pow: return lhs->print() + "^" + std::to_string(index);
        case Op::Neg: return "(-" + lhs->print() + ")";
        case Op::Sin: return "sin(" + lhs->print() + ")";
        case Op::Cos: return "cos(" + lhs->print() + ")";
        case Op::Tanh: return "tanh(" + lhs->print() + ")";
    }
    return "?";
}

Expr::Ptr Expr::constant_expr(double v) {
    auto e = std::make_shared<Expr>();
    e->op = Op::Const;
    e->constant = v;
    return e;
}

Expr::Ptr Expr::shifted(std::span<const double> shift, double control_shift) const {
    auto node = std::make_shared<Expr>(*this);
    if (op == Op::State) {
        double s = (index >= 1 && static_cast<std::size_t>(index) <= shift.size())
                       ? shift[static_cast<std::size_t>(index - 1)]
                       : 0.0;
        if (s == 0.0) return node;
        auto sum = std::make_shared<Expr>();
        sum->op = Op::Add;
        sum->lhs = node;
        sum->rhs = constant_expr(s);
        return sum;
    }
    if (op == Op::Control && control_shift != 0.0) {
        auto sum = std::make_shared<Expr>();
        sum->op = Op::Add;
        sum->lhs = node;
        sum->rhs = constant_expr(control_shift);
        return sum;
    }
    if (lhs) node->lhs = lhs->shifted(shift, control_shift);
    if (rhs) node->rhs = rhs->shifted(shift, control_shift);
    return node;
}

namespace {

class Parser {
  public:
    explicit Parser(const std::string& text) : text_(text) {}

    Expr::Ptr parse() {
        auto e = expression();
        skip_ws();
        if (pos_ != text_.size()) throw SyntaxError(pos_, "end of input or operator");
        return e;
    }

  private:
    const std::string& text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    bool accept(char c) {
        if (peek(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::shared_ptr<Expr> node(Expr::Op op, std::size_t at, Expr::Ptr a = nullptr,
                               Expr::Ptr b = nullptr) {
        auto e = std::make_shared<Expr>();
        e->op = op;
        e->pos = at;
        e->lhs = std::move(a);
        e->rhs = std::move(b);
        return e;
    }

    Expr::Ptr expression() {
        auto e = term();
        for (;;) {
            std::size_t at = pos_;
            if (accept('+'))
                e = node(Expr::Op::Add, at, e, term());
            else if (accept('-'))
                e = node(Expr::Op::Sub, at, e, term());
            else
                return e;
        }
    }

    Expr::Ptr term() {
        auto e = factor();
        for (;;) {
            std::size_t at = pos_;
            if (accept('*'))
                e = node(Expr::Op::Mul, at, e, factor());
            else
                return e;
        }
    }

    Expr::Ptr factor() {
        skip_ws();
        std::size_t at = pos_;
        if (accept('-')) return node(Expr::Op::Neg, at, factor());
        return power();
    }

    // exponentiation binds tighter than unary minus: -u^2 is -(u^2)
    Expr::Ptr power() {
        auto e = primary();
        std::size_t at = pos_;
        if (accept('^')) {
            skip_ws();
            std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (pos_ == start) throw SyntaxError(pos_, "integer exponent");
            auto p = node(Expr::Op::Pow, at, e);
            p->index = std::atoi(text_.substr(start, pos_ - start).c_str());
            return p;
        }
        return e;
    }

    Expr::Ptr primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw SyntaxError(pos_, "number, identifier or '('");
        std::size_t at = pos_;
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto e = expression();
            if (!accept(')')) throw SyntaxError(pos_, "')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            char* end = nullptr;
            double v = std::strtod(text_.c_str() + pos_, &end);
            pos_ = static_cast<std::size_t>(end - text_.c_str());
            auto e = node(Expr::Op::Const, at);
            e->constant = v;
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_]))))
                ++pos_;
            std::string id = text_.substr(start, pos_ - start);
            if (id == "u" || id == "v") return node(Expr::Op::Control, at);
            if (id == "sinT") return node(Expr::Op::SinT, at);
            if (id == "cosT") return node(Expr::Op::CosT, at);
            if (id == "sin" || id == "cos" || id == "tanh") {
                if (!accept('(')) throw SyntaxError(pos_, "'('");
                auto arg = expression();
                if (!accept(')')) throw SyntaxError(pos_, "')'");
                Expr::Op op = id == "sin" ? Expr::Op::Sin
                              : id == "cos" ? Expr::Op::Cos
                                            : Expr::Op::Tanh;
                return node(op, at, arg);
            }
            if ((id[0] == 'x' || id[0] == 'z') && id.size() > 1) {
                bool digits = true;
                for (std::size_t i = 1; i < id.size(); ++i)
                    digits = digits && std::isdigit(static_cast<unsigned char>(id[i]));
                if (digits) {
                    auto e = node(Expr::Op::State, at);
                    e->index = std::atoi(id.c_str() + 1);
                    if (e->index < 1) throw UnknownSymbol("bad state index in '" + id + "'");
                    return e;
                }
            }
            throw UnknownSymbol("unknown symbol '" + id + "' at offset " + std::to_string(at));
        }
        throw SyntaxError(pos_, "number, identifier or '('");
    }
};

}  // namespace

Expr::Ptr parse_dynamics(const std::string& text) { return Parser(text).parse(); }

}  // namespace gtf
