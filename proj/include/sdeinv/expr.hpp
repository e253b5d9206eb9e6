#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdeinv {

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (at offset " + std::to_string(offset) + ")"), offset(offset) {}
    std::size_t offset;
};

struct EvalError : std::runtime_error {
    EvalError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (at offset " + std::to_string(offset) + ")"), offset(offset) {}
    std::size_t offset;
};

/// Arithmetic over variables x1..xn: literals, + - * / ^ (right-assoc, binds
/// tighter than unary minus), unary -, and sqrt/exp/log/abs/min/max/pow.
/// Immutable after parse; eval is pure.
class Expression {
public:
    enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sqrt, Exp, Log, Abs, Min, Max };

    struct Node {
        Op op;
        double value = 0.0;  // Const
        int var = -1;        // Var (0-based)
        int a = -1, b = -1;  // children
        std::size_t offset = 0;
    };

    int dim() const { return dim_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    int root() const { return root_; }

    double eval(std::span<const double> point) const;
    std::string to_string() const;

    friend Expression parse_expression(const std::string& text, int dim);

private:
    std::vector<Node> nodes_;
    int root_ = -1;
    int dim_ = 0;
};

Expression parse_expression(const std::string& text, int dim);

}  // namespace sdeinv
