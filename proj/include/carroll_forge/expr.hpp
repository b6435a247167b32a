#pragma once

// Scalar expression trees over a named coordinate list: parsing, exact
// symbolic differentiation, evaluation, substitution and printing.
//
// Expressions are immutable; Expr is a cheap shared handle.  The only
// rewriting ever performed is constant folding at construction time, so a
// tree evaluates the same way however it was produced.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace carrollforge {

struct ParseError : std::runtime_error {
    std::size_t offset;  // byte offset into the source text
    ParseError(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

struct EvalError : std::runtime_error {
    std::string subexpr;  // printed form of the offending subtree
    EvalError(const std::string& msg, std::string sub)
        : std::runtime_error(msg + " in '" + sub + "'"), subexpr(std::move(sub)) {}
};

enum class Op {
    Const, Var,
    Neg, Sin, Cos, Tan, Exp, Log, Sqrt,
    Add, Sub, Mul, Div, Pow
};

class Expr {
    struct Node {
        Op op;
        double value = 0.0;   // Const
        int var = -1;         // Var: index into the coordinate list
        std::string name;     // Var: coordinate name (for printing)
        std::shared_ptr<const Node> a, b;
    };
    std::shared_ptr<const Node> n_;
    explicit Expr(std::shared_ptr<const Node> n) : n_(std::move(n)) {}

    static Expr make(Node&& n) { return Expr(std::make_shared<const Node>(std::move(n))); }

public:
    Expr() = default;  // empty handle; using it is a programming error

    static Expr constant(double v) { return make({Op::Const, v}); }
    static Expr variable(int index, std::string name) {
        Node n{Op::Var};
        n.var = index;
        n.name = std::move(name);
        return make(std::move(n));
    }

    bool valid() const { return n_ != nullptr; }
    Op op() const { return n_->op; }
    bool is_constant() const { return n_->op == Op::Const; }
    bool is_constant(double v) const { return is_constant() && n_->value == v; }
    double constant_value() const { return n_->value; }
    int var_index() const { return n_->var; }
    const std::string& var_name() const { return n_->name; }
    Expr child_a() const { return Expr(n_->a); }
    Expr child_b() const { return Expr(n_->b); }

    // Structural identity of handles (shared subtree), not semantic equality.
    bool same_node(const Expr& o) const { return n_ == o.n_; }

    friend Expr unary(Op op, const Expr& a);
    friend Expr binary(Op op, const Expr& a, const Expr& b);
};

namespace detail {
inline double apply_unary(Op op, double x) {
    switch (op) {
        case Op::Neg: return -x;
        case Op::Sin: return std::sin(x);
        case Op::Cos: return std::cos(x);
        case Op::Tan: return std::tan(x);
        case Op::Exp: return std::exp(x);
        case Op::Log: return std::log(x);
        case Op::Sqrt: return std::sqrt(x);
        default: throw std::logic_error("apply_unary: not a unary op");
    }
}
inline double apply_binary(Op op, double x, double y) {
    switch (op) {
        case Op::Add: return x + y;
        case Op::Sub: return x - y;
        case Op::Mul: return x * y;
        case Op::Div: return x / y;
        case Op::Pow: return std::pow(x, y);
        default: throw std::logic_error("apply_binary: not a binary op");
    }
}
}  // namespace detail

// Folding constructors.  Folding is limited to combining constant operands
// and the unit/zero identities; no reassociation, so evaluation order is
// preserved for everything that is not folded away.
inline Expr unary(Op op, const Expr& a) {
    if (a.is_constant()) {
        double v = detail::apply_unary(op, a.constant_value());
        if (std::isfinite(v)) return Expr::constant(v);
    }
    if (op == Op::Neg && a.op() == Op::Neg) return a.child_a();
    Expr::Node n{op};
    n.a = a.n_;
    return Expr::make(std::move(n));
}

inline Expr binary(Op op, const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) {
        double v = detail::apply_binary(op, a.constant_value(), b.constant_value());
        if (std::isfinite(v)) return Expr::constant(v);
    }
    switch (op) {
        case Op::Add:
            if (a.is_constant(0)) return b;
            if (b.is_constant(0)) return a;
            break;
        case Op::Sub:
            if (b.is_constant(0)) return a;
            if (a.is_constant(0)) return unary(Op::Neg, b);
            break;
        case Op::Mul:
            if (a.is_constant(0) || b.is_constant(0)) return Expr::constant(0);
            if (a.is_constant(1)) return b;
            if (b.is_constant(1)) return a;
            break;
        case Op::Div:
            if (b.is_constant(1)) return a;
            break;
        case Op::Pow:
            if (b.is_constant(0)) return Expr::constant(1);
            if (b.is_constant(1)) return a;
            break;
        default:
            break;
    }
    Expr::Node n{op};
    n.a = a.n_;
    n.b = b.n_;
    return Expr::make(std::move(n));
}

inline Expr operator+(const Expr& a, const Expr& b) { return binary(Op::Add, a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return binary(Op::Sub, a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return binary(Op::Mul, a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return binary(Op::Div, a, b); }
inline Expr operator-(const Expr& a) { return unary(Op::Neg, a); }

inline Expr sin(const Expr& a) { return unary(Op::Sin, a); }
inline Expr cos(const Expr& a) { return unary(Op::Cos, a); }
inline Expr tan(const Expr& a) { return unary(Op::Tan, a); }
inline Expr exp(const Expr& a) { return unary(Op::Exp, a); }
inline Expr log(const Expr& a) { return unary(Op::Log, a); }
inline Expr sqrt(const Expr& a) { return unary(Op::Sqrt, a); }
inline Expr pow(const Expr& a, const Expr& b) { return binary(Op::Pow, a, b); }
inline Expr pow(const Expr& a, double p) { return binary(Op::Pow, a, Expr::constant(p)); }

// ---------------------------------------------------------------------------
// Printing

namespace detail {
// Precedence levels used by the printer: higher binds tighter.
inline int precedence(Op op) {
    switch (op) {
        case Op::Add: case Op::Sub: return 1;
        case Op::Mul: case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        default: return 5;
    }
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char* function_name(Op op) {
    switch (op) {
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Tan: return "tan";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        default: return nullptr;
    }
}

inline void print_rec(const Expr& e, std::string& out, int parent_prec, bool right_operand) {
    const Op op = e.op();
    switch (op) {
        case Op::Const: {
            double v = e.constant_value();
            if (v < 0) {  // negative literal behaves like a Neg for precedence
                if (parent_prec >= precedence(Op::Neg)) {
                    out += '(';
                    out += format_double(v);
                    out += ')';
                } else {
                    out += format_double(v);
                }
            } else {
                out += format_double(v);
            }
            return;
        }
        case Op::Var:
            out += e.var_name();
            return;
        case Op::Neg: {
            int prec = precedence(op);
            bool paren = parent_prec > prec || (parent_prec == prec && right_operand);
            if (paren) out += '(';
            out += '-';
            print_rec(e.child_a(), out, prec, false);
            if (paren) out += ')';
            return;
        }
        case Op::Sin: case Op::Cos: case Op::Tan:
        case Op::Exp: case Op::Log: case Op::Sqrt:
            out += function_name(op);
            out += '(';
            print_rec(e.child_a(), out, 0, false);
            out += ')';
            return;
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: case Op::Pow: {
            int prec = precedence(op);
            // -, / and ^ are non-associative on the right; parenthesise the
            // right operand at equal precedence.
            bool paren = parent_prec > prec || (parent_prec == prec && right_operand);
            if (paren) out += '(';
            print_rec(e.child_a(), out, prec, false);
            switch (op) {
                case Op::Add: out += " + "; break;
                case Op::Sub: out += " - "; break;
                case Op::Mul: out += "*"; break;
                case Op::Div: out += "/"; break;
                case Op::Pow: out += "^"; break;
                default: break;
            }
            print_rec(e.child_b(), out, prec, true);
            if (paren) out += ')';
            return;
        }
    }
}
}  // namespace detail

inline std::string print(const Expr& e) {
    std::string out;
    detail::print_rec(e, out, 0, false);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

inline double evaluate(const Expr& e, std::span<const double> point) {
    switch (e.op()) {
        case Op::Const: return e.constant_value();
        case Op::Var: {
            int i = e.var_index();
            if (i < 0 || static_cast<std::size_t>(i) >= point.size())
                throw EvalError("coordinate value missing", e.var_name());
            return point[static_cast<std::size_t>(i)];
        }
        case Op::Neg: return -evaluate(e.child_a(), point);
        case Op::Sin: return std::sin(evaluate(e.child_a(), point));
        case Op::Cos: return std::cos(evaluate(e.child_a(), point));
        case Op::Tan: {
            double x = evaluate(e.child_a(), point);
            double c = std::cos(x);
            if (c == 0.0) throw EvalError("tangent pole", print(e));
            return std::tan(x);
        }
        case Op::Exp: return std::exp(evaluate(e.child_a(), point));
        case Op::Log: {
            double x = evaluate(e.child_a(), point);
            if (x <= 0.0) throw EvalError("log of non-positive value", print(e));
            return std::log(x);
        }
        case Op::Sqrt: {
            double x = evaluate(e.child_a(), point);
            if (x < 0.0) throw EvalError("sqrt of negative value", print(e));
            return std::sqrt(x);
        }
        case Op::Add: return evaluate(e.child_a(), point) + evaluate(e.child_b(), point);
        case Op::Sub: return evaluate(e.child_a(), point) - evaluate(e.child_b(), point);
        case Op::Mul: return evaluate(e.child_a(), point) * evaluate(e.child_b(), point);
        case Op::Div: {
            double num = evaluate(e.child_a(), point);
            double den = evaluate(e.child_b(), point);
            if (den == 0.0) throw EvalError("division by zero", print(e));
            return num / den;
        }
        case Op::Pow: {
            double base = evaluate(e.child_a(), point);
            double p = evaluate(e.child_b(), point);
            if (base < 0.0 && p != std::floor(p))
                throw EvalError("fractional power of negative base", print(e));
            if (base == 0.0 && p < 0.0) throw EvalError("zero raised to negative power", print(e));
            return std::pow(base, p);
        }
    }
    throw std::logic_error("evaluate: corrupt node");
}

inline double evaluate(const Expr& e,
                       const std::unordered_map<std::string, double>& point,
                       std::span<const std::string> coords) {
    std::vector<double> v(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        auto it = point.find(coords[i]);
        if (it == point.end()) throw EvalError("coordinate value missing", coords[i]);
        v[i] = it->second;
    }
    return evaluate(e, v);
}

// ---------------------------------------------------------------------------
// Differentiation and substitution

// Exact symbolic derivative with respect to the coordinate with index `var`.
// Powers with constant exponent use d(f^p) = p*f^(p-1)*f'; non-constant
// exponents cannot be constructed by the parser or the factories used here.
inline Expr differentiate(const Expr& e, int var) {
    switch (e.op()) {
        case Op::Const: return Expr::constant(0);
        case Op::Var: return Expr::constant(e.var_index() == var ? 1 : 0);
        case Op::Neg: return -differentiate(e.child_a(), var);
        case Op::Sin: return cos(e.child_a()) * differentiate(e.child_a(), var);
        case Op::Cos: return -(sin(e.child_a()) * differentiate(e.child_a(), var));
        case Op::Tan: {
            // d tan f = f' / cos^2 f
            Expr c = cos(e.child_a());
            return differentiate(e.child_a(), var) / (c * c);
        }
        case Op::Exp: return e * differentiate(e.child_a(), var);
        case Op::Log: return differentiate(e.child_a(), var) / e.child_a();
        case Op::Sqrt:
            return differentiate(e.child_a(), var) / (Expr::constant(2) * e);
        case Op::Add: return differentiate(e.child_a(), var) + differentiate(e.child_b(), var);
        case Op::Sub: return differentiate(e.child_a(), var) - differentiate(e.child_b(), var);
        case Op::Mul:
            return differentiate(e.child_a(), var) * e.child_b() +
                   e.child_a() * differentiate(e.child_b(), var);
        case Op::Div: {
            Expr f = e.child_a(), g = e.child_b();
            return (differentiate(f, var) * g - f * differentiate(g, var)) / (g * g);
        }
        case Op::Pow: {
            Expr f = e.child_a(), p = e.child_b();
            if (!p.is_constant())
                throw std::logic_error("differentiate: non-constant exponent");
            double pv = p.constant_value();
            return Expr::constant(pv) * pow(f, pv - 1.0) * differentiate(f, var);
        }
    }
    throw std::logic_error("differentiate: corrupt node");
}

// Replace every occurrence of coordinate `var` by `replacement`.
inline Expr substitute(const Expr& e, int var, const Expr& replacement) {
    switch (e.op()) {
        case Op::Const: return e;
        case Op::Var: return e.var_index() == var ? replacement : e;
        case Op::Neg: case Op::Sin: case Op::Cos: case Op::Tan:
        case Op::Exp: case Op::Log: case Op::Sqrt: {
            Expr a = substitute(e.child_a(), var, replacement);
            if (a.same_node(e.child_a())) return e;
            return unary(e.op(), a);
        }
        default: {
            Expr a = substitute(e.child_a(), var, replacement);
            Expr b = substitute(e.child_b(), var, replacement);
            if (a.same_node(e.child_a()) && b.same_node(e.child_b())) return e;
            return binary(e.op(), a, b);
        }
    }
}

// True when the coordinate appears in the tree.
inline bool depends_on(const Expr& e, int var) {
    switch (e.op()) {
        case Op::Const: return false;
        case Op::Var: return e.var_index() == var;
        case Op::Neg: case Op::Sin: case Op::Cos: case Op::Tan:
        case Op::Exp: case Op::Log: case Op::Sqrt:
            return depends_on(e.child_a(), var);
        default:
            return depends_on(e.child_a(), var) || depends_on(e.child_b(), var);
    }
}

// ---------------------------------------------------------------------------
// Parser
//
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := ("-")? power
//   power  := atom ("^" atom)?
//   atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
//
// Recognised functions: sin cos tan exp log sqrt.  Recognised constant: pi.
// Any other identifier must be a coordinate name.

namespace detail {

class Parser {
public:
    Parser(std::string_view text, std::span<const std::string> coords)
        : text_(text), coords_(coords) {}

    Expr run() {
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size())
            throw ParseError("unexpected trailing input", pos_);
        return e;
    }

private:
    std::string_view text_;
    std::span<const std::string> coords_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }
    bool peek(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }
    bool accept(char c) {
        if (peek(c)) { ++pos_; return true; }
        return false;
    }
    void expect(char c) {
        if (!accept(c))
            throw ParseError(std::string("expected '") + c + "'", pos_);
    }

    Expr parse_expr() {
        Expr e = parse_term();
        for (;;) {
            if (accept('+')) e = e + parse_term();
            else if (accept('-')) e = e - parse_term();
            else return e;
        }
    }

    Expr parse_term() {
        Expr e = parse_factor();
        for (;;) {
            if (accept('*')) e = e * parse_factor();
            else if (accept('/')) e = e / parse_factor();
            else return e;
        }
    }

    Expr parse_factor() {
        if (accept('-')) return -parse_power();
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_atom();
        if (accept('^')) {
            std::size_t at = pos_;
            Expr exponent = parse_atom();
            if (!exponent.is_constant())
                throw ParseError("exponent must be a constant", at);
            return pow(base, exponent);
        }
        return base;
    }

    Expr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = parse_expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    Expr parse_number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            } else {
                pos_ = mark;  // 'e' was not an exponent marker
            }
        }
        std::string tok(text_.substr(start, pos_ - start));
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size())
            throw ParseError("malformed number '" + tok + "'", start);
        return Expr::constant(v);
    }

    Expr parse_ident() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name(text_.substr(start, pos_ - start));
        if (peek('(')) {
            Op op;
            if (name == "sin") op = Op::Sin;
            else if (name == "cos") op = Op::Cos;
            else if (name == "tan") op = Op::Tan;
            else if (name == "exp") op = Op::Exp;
            else if (name == "log") op = Op::Log;
            else if (name == "sqrt") op = Op::Sqrt;
            else throw ParseError("unknown function '" + name + "'", start);
            expect('(');
            Expr arg = parse_expr();
            expect(')');
            return unary(op, arg);
        }
        if (name == "pi") return Expr::constant(3.14159265358979323846);
        for (std::size_t i = 0; i < coords_.size(); ++i)
            if (coords_[i] == name) return Expr::variable(static_cast<int>(i), name);
        throw ParseError("unknown identifier '" + name + "'", start);
    }
};

}  // namespace detail

inline Expr parse(std::string_view text, std::span<const std::string> coords) {
    return detail::Parser(text, coords).run();
}

inline Expr parse(std::string_view text, std::initializer_list<std::string> coords) {
    std::vector<std::string> v(coords);
    return parse(text, v);
}

}  // namespace carrollforge
