#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kinfer {

// Node kinds of an expression tree. Const/Param/Var are leaves; Exp is the
// only unary operator; Add/Sub/Mul/Div are binary.
enum class Op : std::uint8_t { Const, Param, Var, Add, Sub, Mul, Div, Exp };

constexpr int arity(Op op) noexcept
{
    switch (op) {
    case Op::Const:
    case Op::Param:
    case Op::Var:
        return 0;
    case Op::Exp:
        return 1;
    default:
        return 2;
    }
}

constexpr bool is_leaf(Op op) noexcept { return arity(op) == 0; }

std::string_view op_name(Op op);

struct Node {
    Op op = Op::Const;
    std::uint16_t index = 0;  // variable slot for Var, parameter slot for Param
    std::uint16_t size = 1;   // number of nodes in the subtree rooted here
    double value = 0.0;       // Const only

    friend bool operator==(const Node&, const Node&) = default;
};

/// Immutable expression tree stored in postfix order.
///
/// The subtree rooted at node i occupies [i - size + 1, i]. For a binary node
/// the right child ends at i - 1 and the left child ends just before the right
/// child's first node. Leaves of the tree are therefore visited left to right
/// when scanning the node array front to back.
class Expr {
public:
    Expr() : nodes_{Node{}} {}

    static Expr constant(double value);
    static Expr variable(std::size_t index);
    static Expr param(std::size_t index);
    static Expr unary(Op op, const Expr& child);
    static Expr binary(Op op, const Expr& left, const Expr& right);
    static Expr from_nodes(std::vector<Node> nodes);

    std::span<const Node> nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& root() const noexcept { return nodes_.back(); }

    /// Index of the first node of the subtree rooted at i.
    std::size_t subtree_begin(std::size_t i) const noexcept { return i + 1 - nodes_[i].size; }
    Expr subtree(std::size_t i) const;
    /// Copy of this tree with the subtree at i replaced by `replacement`.
    Expr replace_subtree(std::size_t i, const Expr& replacement) const;

    /// Root-level children; only valid for non-leaf roots.
    Expr left() const;
    Expr right() const;
    Expr child() const { return left(); }

    bool has_params() const noexcept;
    std::size_t param_count() const noexcept;
    std::size_t const_count() const noexcept;
    std::size_t max_var_index() const noexcept;  // 0 when no variables
    bool uses_variable(std::size_t index) const noexcept;

    friend bool operator==(const Expr&, const Expr&) = default;

private:
    explicit Expr(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}
    std::vector<Node> nodes_;
};

/// Node count, the complexity measure used by the hall of fame.
inline std::size_t complexity(const Expr& e) noexcept { return e.size(); }

struct ConstRange {
    double lower = -10.0;
    double upper = 10.0;
};

struct Grammar {
    std::vector<Op> operators;  // subset of {Add, Sub, Mul, Div, Exp}
    std::vector<std::string> variables;
    ConstRange constants;
    std::size_t complexity_cap = 25;

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;
    bool allows(Op op) const noexcept;
    std::ptrdiff_t variable_index(std::string_view name) const noexcept;
    /// True when every operator and variable in `e` belongs to this grammar
    /// and e has no parameter slots.
    bool admits(const Expr& e) const noexcept;

    /// {+,-,*,/,exp} over the single variable `t`.
    static Grammar profile(std::size_t complexity_cap = 15);
    /// {+,-,*,/} over species concentrations.
    static Grammar rate(std::vector<std::string> species, std::size_t complexity_cap = 25);
};

struct ParamTemplate {
    Expr skeleton;  // Const leaves replaced by Param slots numbered in postfix order
    std::size_t dimension = 0;

    /// Replace Param slot k by Const(theta[k]).
    Expr substitute(std::span<const double> theta) const;

    friend bool operator==(const ParamTemplate&, const ParamTemplate&) = default;
};

ParamTemplate extract_template(const Expr& e);
/// Const leaf values in slot order.
std::vector<double> constants_of(const Expr& e);
/// Build a template from an expression whose leaves may already be Param
/// slots; any Const leaves are kept as fixed numbers.
ParamTemplate as_template(const Expr& e);

/// Pointwise evaluation. Division by zero and exp overflow propagate as
/// inf/NaN; callers test the result with std::isfinite.
double evaluate(const Expr& e, std::span<const double> vars, std::span<const double> params = {});

/// Column-wise evaluation over `rows` points. columns[v] holds the values of
/// variable v for every row.
void evaluate_rows(const Expr& e,
                   std::span<const std::span<const double>> columns,
                   std::span<const double> params,
                   std::span<double> out);

Expr differentiate(const Expr& e, std::size_t var);
Expr simplify(const Expr& e);

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, const std::string& what);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Canonical infix text. Binary operators are left associative; parentheses
/// appear only where needed to keep the tree shape, negative constants are
/// always wrapped, and parameter slots print as p[k].
std::string format(const Expr& e, std::span<const std::string> names);
Expr parse(std::string_view text, std::span<const std::string> names);
/// Parses and checks the result against the grammar's operator set.
Expr parse(std::string_view text, const Grammar& grammar);

/// Shortest text that reads back to the same double.
std::string format_number(double value);

}  // namespace kinfer
