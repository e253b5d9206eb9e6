#include "sdeinv/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace sdeinv {

namespace {

class Parser {
public:
    Parser(const std::string& text, int dim) : text_(text), dim_(dim) {}

    void run() {
        root_ = expr();
        skip_ws();
        if (pos_ < text_.size()) throw ParseError("trailing input", pos_);
    }

    std::vector<Expression::Node> nodes_;
    int root_ = -1;

private:
    using Op = Expression::Op;

    int make(Expression::Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    int expr() {
        int lhs = term();
        for (;;) {
            skip_ws();
            const std::size_t at = pos_;
            if (eat('+'))
                lhs = make({Op::Add, 0.0, -1, lhs, term(), at});
            else if (eat('-'))
                lhs = make({Op::Sub, 0.0, -1, lhs, term(), at});
            else
                return lhs;
        }
    }

    int term() {
        int lhs = unary();
        for (;;) {
            skip_ws();
            const std::size_t at = pos_;
            if (eat('*'))
                lhs = make({Op::Mul, 0.0, -1, lhs, unary(), at});
            else if (eat('/'))
                lhs = make({Op::Div, 0.0, -1, lhs, unary(), at});
            else
                return lhs;
        }
    }

    int unary() {
        skip_ws();
        const std::size_t at = pos_;
        if (eat('-')) return make({Op::Neg, 0.0, -1, unary(), -1, at});
        return power();
    }

    // '^' is right-associative and binds tighter than unary minus:
    // -x1^2 is -(x1^2), and 2^-3 is allowed.
    int power() {
        int base = primary();
        skip_ws();
        const std::size_t at = pos_;
        if (eat('^')) return make({Op::Pow, 0.0, -1, base, unary(), at});
        return base;
    }

    int primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        const std::size_t at = pos_;
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            const int e = expr();
            if (!eat(')')) throw ParseError("expected ')'", pos_);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", at);
    }

    int number() {
        const std::size_t at = pos_;
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) throw ParseError("malformed number", at);
        pos_ += static_cast<std::size_t>(end - begin);
        return make({Op::Const, v, -1, -1, -1, at});
    }

    int identifier() {
        const std::size_t at = pos_;
        std::string name;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            name += text_[pos_++];

        if (name.size() >= 2 && name[0] == 'x') {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
            if (digits) {
                const long k = std::stol(name.substr(1));
                if (k < 1 || k > dim_)
                    throw ParseError("variable " + name + " out of range for dimension " +
                                         std::to_string(dim_),
                                     at);
                return make({Op::Var, 0.0, static_cast<int>(k - 1), -1, -1, at});
            }
        }

        Op op;
        int arity;
        if (name == "sqrt") { op = Op::Sqrt; arity = 1; }
        else if (name == "exp") { op = Op::Exp; arity = 1; }
        else if (name == "log") { op = Op::Log; arity = 1; }
        else if (name == "abs") { op = Op::Abs; arity = 1; }
        else if (name == "min") { op = Op::Min; arity = 2; }
        else if (name == "max") { op = Op::Max; arity = 2; }
        else if (name == "pow") { op = Op::Pow; arity = 2; }
        else throw ParseError("unknown identifier '" + name + "'", at);

        if (!eat('(')) throw ParseError("expected '(' after " + name, pos_);
        const int a = expr();
        int b = -1;
        if (arity == 2) {
            if (!eat(',')) throw ParseError("expected ',' in " + name, pos_);
            b = expr();
        }
        if (!eat(')')) throw ParseError("expected ')' closing " + name, pos_);
        return make({op, 0.0, -1, a, b, at});
    }

    const std::string& text_;
    int dim_;
    std::size_t pos_ = 0;
};

int precedence(Expression::Op op) {
    using Op = Expression::Op;
    switch (op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        default: return 5;
    }
}

std::string format_literal(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

// Parenthesize a child whenever its precedence falls below the threshold the
// grammar requires at that position.
void print_node(const Expression& e, int id, int min_prec, std::ostream& os) {
    using Op = Expression::Op;
    const Expression::Node& n = e.nodes()[static_cast<std::size_t>(id)];
    const int prec = precedence(n.op);
    const bool parens = prec < min_prec || (n.op == Op::Const && n.value < 0.0);
    if (parens) os << '(';

    const auto infix = [&](const char* sym) {
        print_node(e, n.a, prec, os);
        os << ' ' << sym << ' ';
        print_node(e, n.b, prec + 1, os);
    };

    switch (n.op) {
        case Op::Const: os << format_literal(n.value); break;
        case Op::Var: os << 'x' << (n.var + 1); break;
        case Op::Neg:
            os << '-';
            print_node(e, n.a, 3, os);
            break;
        case Op::Add: infix("+"); break;
        case Op::Sub: infix("-"); break;
        case Op::Mul: infix("*"); break;
        case Op::Div: infix("/"); break;
        case Op::Pow:
            print_node(e, n.a, 5, os);
            os << '^';
            print_node(e, n.b, 3, os);
            break;
        case Op::Sqrt:
        case Op::Exp:
        case Op::Log:
        case Op::Abs:
        case Op::Min:
        case Op::Max: {
            const char* name = n.op == Op::Sqrt ? "sqrt"
                               : n.op == Op::Exp ? "exp"
                               : n.op == Op::Log ? "log"
                               : n.op == Op::Abs ? "abs"
                               : n.op == Op::Min ? "min"
                                                 : "max";
            os << name << '(';
            print_node(e, n.a, 0, os);
            if (n.b >= 0) {
                os << ", ";
                print_node(e, n.b, 0, os);
            }
            os << ')';
            break;
        }
    }
    if (parens) os << ')';
}

}  // namespace

Expression parse_expression(const std::string& text, int dim) {
    if (dim < 0) throw std::invalid_argument("parse_expression: negative dimension");
    Parser p(text, dim);
    p.run();
    Expression e;
    e.nodes_ = std::move(p.nodes_);
    e.root_ = p.root_;
    e.dim_ = dim;
    return e;
}

double Expression::eval(std::span<const double> point) const {
    if (static_cast<int>(point.size()) != dim_)
        throw std::invalid_argument("Expression::eval: point has wrong dimension");

    std::vector<double> v(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        const double a = n.a >= 0 ? v[static_cast<std::size_t>(n.a)] : 0.0;
        const double b = n.b >= 0 ? v[static_cast<std::size_t>(n.b)] : 0.0;
        double r = 0.0;
        switch (n.op) {
            case Op::Const: r = n.value; break;
            case Op::Var: r = point[static_cast<std::size_t>(n.var)]; break;
            case Op::Neg: r = -a; break;
            case Op::Add: r = a + b; break;
            case Op::Sub: r = a - b; break;
            case Op::Mul: r = a * b; break;
            case Op::Div:
                if (b == 0.0) throw EvalError("division by zero", n.offset);
                r = a / b;
                break;
            case Op::Pow: {
                if (a == 0.0 && b < 0.0) throw EvalError("zero raised to negative power", n.offset);
                if (a < 0.0 && b != std::floor(b))
                    throw EvalError("negative base with non-integer exponent", n.offset);
                r = std::pow(a, b);
                break;
            }
            case Op::Sqrt:
                if (a < 0.0) throw EvalError("sqrt of negative value", n.offset);
                r = std::sqrt(a);
                break;
            case Op::Exp: r = std::exp(a); break;
            case Op::Log:
                if (a <= 0.0) throw EvalError("log of non-positive value", n.offset);
                r = std::log(a);
                break;
            case Op::Abs: r = std::abs(a); break;
            case Op::Min: r = std::min(a, b); break;
            case Op::Max: r = std::max(a, b); break;
        }
        if (!std::isfinite(r)) throw EvalError("non-finite result", n.offset);
        v[i] = r;
    }
    return v[static_cast<std::size_t>(root_)];
}

std::string Expression::to_string() const {
    std::ostringstream os;
    print_node(*this, root_, 0, os);
    return os.str();
}

}  // namespace sdeinv
