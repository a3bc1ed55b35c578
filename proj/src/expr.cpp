#include "kinfer/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace kinfer {

std::string_view op_name(Op op)
{
    switch (op) {
    case Op::Const: return "const";
    case Op::Param: return "param";
    case Op::Var: return "var";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Exp: return "exp";
    }
    return "?";
}

namespace {

constexpr std::size_t kMaxNodes = std::numeric_limits<std::uint16_t>::max();

// Rebuilds subtree sizes and checks that the postfix sequence forms one tree.
void recompute_sizes(std::vector<Node>& nodes)
{
    if (nodes.empty())
        throw std::invalid_argument("expression has no nodes");
    if (nodes.size() > kMaxNodes)
        throw std::length_error("expression exceeds node limit");
    std::vector<std::uint16_t> stack;
    stack.reserve(nodes.size());
    for (auto& n : nodes) {
        const int k = arity(n.op);
        if (static_cast<int>(stack.size()) < k)
            throw std::invalid_argument("malformed postfix expression");
        std::size_t total = 1;
        for (int j = 0; j < k; ++j) {
            total += stack.back();
            stack.pop_back();
        }
        n.size = static_cast<std::uint16_t>(total);
        stack.push_back(n.size);
    }
    if (stack.size() != 1)
        throw std::invalid_argument("malformed postfix expression");
}

}  // namespace

Expr Expr::constant(double value)
{
    Node n;
    n.op = Op::Const;
    n.value = value;
    return Expr({n});
}

Expr Expr::variable(std::size_t index)
{
    Node n;
    n.op = Op::Var;
    n.index = static_cast<std::uint16_t>(index);
    return Expr({n});
}

Expr Expr::param(std::size_t index)
{
    Node n;
    n.op = Op::Param;
    n.index = static_cast<std::uint16_t>(index);
    return Expr({n});
}

Expr Expr::unary(Op op, const Expr& child)
{
    if (arity(op) != 1)
        throw std::invalid_argument("unary() needs a unary operator");
    if (child.size() + 1 > kMaxNodes)
        throw std::length_error("expression exceeds node limit");
    std::vector<Node> nodes(child.nodes_);
    Node n;
    n.op = op;
    n.size = static_cast<std::uint16_t>(child.size() + 1);
    nodes.push_back(n);
    return Expr(std::move(nodes));
}

Expr Expr::binary(Op op, const Expr& left, const Expr& right)
{
    if (arity(op) != 2)
        throw std::invalid_argument("binary() needs a binary operator");
    const std::size_t total = left.size() + right.size() + 1;
    if (total > kMaxNodes)
        throw std::length_error("expression exceeds node limit");
    std::vector<Node> nodes;
    nodes.reserve(total);
    nodes.insert(nodes.end(), left.nodes_.begin(), left.nodes_.end());
    nodes.insert(nodes.end(), right.nodes_.begin(), right.nodes_.end());
    Node n;
    n.op = op;
    n.size = static_cast<std::uint16_t>(total);
    nodes.push_back(n);
    return Expr(std::move(nodes));
}

Expr Expr::from_nodes(std::vector<Node> nodes)
{
    recompute_sizes(nodes);
    return Expr(std::move(nodes));
}

Expr Expr::subtree(std::size_t i) const
{
    const auto b = subtree_begin(i);
    return Expr(std::vector<Node>(nodes_.begin() + static_cast<std::ptrdiff_t>(b),
                                  nodes_.begin() + static_cast<std::ptrdiff_t>(i) + 1));
}

Expr Expr::replace_subtree(std::size_t i, const Expr& replacement) const
{
    const auto b = subtree_begin(i);
    std::vector<Node> nodes;
    nodes.reserve(nodes_.size() - nodes_[i].size + replacement.size());
    nodes.insert(nodes.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(b));
    nodes.insert(nodes.end(), replacement.nodes_.begin(), replacement.nodes_.end());
    nodes.insert(nodes.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(i) + 1, nodes_.end());
    return from_nodes(std::move(nodes));
}

Expr Expr::left() const
{
    const std::size_t r = nodes_.size() - 1;
    switch (arity(nodes_[r].op)) {
    case 1:
        return subtree(r - 1);
    case 2:
        return subtree(r - 1 - nodes_[r - 1].size);
    default:
        throw std::logic_error("leaf has no children");
    }
}

Expr Expr::right() const
{
    const std::size_t r = nodes_.size() - 1;
    if (arity(nodes_[r].op) != 2)
        throw std::logic_error("right() needs a binary root");
    return subtree(r - 1);
}

bool Expr::has_params() const noexcept
{
    return std::any_of(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.op == Op::Param; });
}

std::size_t Expr::param_count() const noexcept
{
    std::size_t count = 0;
    for (const auto& n : nodes_)
        if (n.op == Op::Param)
            count = std::max<std::size_t>(count, n.index + 1u);
    return count;
}

std::size_t Expr::const_count() const noexcept
{
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.op == Op::Const; }));
}

std::size_t Expr::max_var_index() const noexcept
{
    std::size_t m = 0;
    for (const auto& n : nodes_)
        if (n.op == Op::Var)
            m = std::max<std::size_t>(m, n.index);
    return m;
}

bool Expr::uses_variable(std::size_t index) const noexcept
{
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [index](const Node& n) { return n.op == Op::Var && n.index == index; });
}

// ---------------------------------------------------------------------------
// Grammar

void Grammar::validate() const
{
    if (variables.empty())
        throw std::invalid_argument("grammar needs at least one variable");
    if (operators.empty())
        throw std::invalid_argument("grammar needs at least one operator");
    for (Op op : operators)
        if (is_leaf(op))
            throw std::invalid_argument("grammar operators must be Add/Sub/Mul/Div/Exp");
    if (!(constants.lower <= constants.upper))
        throw std::invalid_argument("constant range lower bound exceeds upper bound");
    if (complexity_cap < 1)
        throw std::invalid_argument("complexity cap must be at least 1");
}

bool Grammar::allows(Op op) const noexcept
{
    return std::find(operators.begin(), operators.end(), op) != operators.end();
}

std::ptrdiff_t Grammar::variable_index(std::string_view name) const noexcept
{
    for (std::size_t i = 0; i < variables.size(); ++i)
        if (variables[i] == name)
            return static_cast<std::ptrdiff_t>(i);
    return -1;
}

bool Grammar::admits(const Expr& e) const noexcept
{
    if (complexity(e) > complexity_cap)
        return false;
    for (const auto& n : e.nodes()) {
        if (n.op == Op::Param)
            return false;
        if (n.op == Op::Var && n.index >= variables.size())
            return false;
        if (!is_leaf(n.op) && !allows(n.op))
            return false;
    }
    return true;
}

Grammar Grammar::profile(std::size_t complexity_cap)
{
    Grammar g;
    g.operators = {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Exp};
    g.variables = {"t"};
    g.complexity_cap = complexity_cap;
    return g;
}

Grammar Grammar::rate(std::vector<std::string> species, std::size_t complexity_cap)
{
    Grammar g;
    g.operators = {Op::Add, Op::Sub, Op::Mul, Op::Div};
    g.variables = std::move(species);
    g.complexity_cap = complexity_cap;
    return g;
}

// ---------------------------------------------------------------------------
// Templates

Expr ParamTemplate::substitute(std::span<const double> theta) const
{
    if (theta.size() != dimension)
        throw std::invalid_argument("parameter vector length does not match template dimension");
    std::vector<Node> nodes(skeleton.nodes().begin(), skeleton.nodes().end());
    for (auto& n : nodes) {
        if (n.op == Op::Param) {
            n.op = Op::Const;
            n.value = theta[n.index];
            n.index = 0;
        }
    }
    return Expr::from_nodes(std::move(nodes));
}

ParamTemplate extract_template(const Expr& e)
{
    std::vector<Node> nodes(e.nodes().begin(), e.nodes().end());
    std::uint16_t slot = 0;
    for (auto& n : nodes) {
        if (n.op == Op::Const) {
            n.op = Op::Param;
            n.index = slot++;
            n.value = 0.0;
        }
    }
    return ParamTemplate{Expr::from_nodes(std::move(nodes)), slot};
}

std::vector<double> constants_of(const Expr& e)
{
    std::vector<double> out;
    for (const auto& n : e.nodes())
        if (n.op == Op::Const)
            out.push_back(n.value);
    return out;
}

ParamTemplate as_template(const Expr& e)
{
    return ParamTemplate{e, e.param_count()};
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

inline double apply(Op op, double a, double b) noexcept
{
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    default: return std::numeric_limits<double>::quiet_NaN();
    }
}

template <class Stack>
double run_stack(const Expr& e, std::span<const double> vars, std::span<const double> params, Stack& stack)
{
    std::size_t top = 0;
    for (const auto& n : e.nodes()) {
        switch (n.op) {
        case Op::Const:
            stack[top++] = n.value;
            break;
        case Op::Param:
            stack[top++] = n.index < params.size() ? params[n.index] : std::numeric_limits<double>::quiet_NaN();
            break;
        case Op::Var:
            stack[top++] = n.index < vars.size() ? vars[n.index] : std::numeric_limits<double>::quiet_NaN();
            break;
        case Op::Exp:
            stack[top - 1] = std::exp(stack[top - 1]);
            break;
        default: {
            const double b = stack[--top];
            stack[top - 1] = apply(n.op, stack[top - 1], b);
            break;
        }
        }
    }
    return stack[0];
}

}  // namespace

double evaluate(const Expr& e, std::span<const double> vars, std::span<const double> params)
{
    if (e.size() <= 128) {
        std::array<double, 128> stack;
        return run_stack(e, vars, params, stack);
    }
    std::vector<double> stack(e.size());
    return run_stack(e, vars, params, stack);
}

void evaluate_rows(const Expr& e,
                   std::span<const std::span<const double>> columns,
                   std::span<const double> params,
                   std::span<double> out)
{
    const std::size_t rows = out.size();
    for (const auto& n : e.nodes()) {
        if (n.op == Op::Var && (n.index >= columns.size() || columns[n.index].size() < rows))
            throw std::out_of_range("evaluate_rows: missing variable column");
        if (n.op == Op::Param && n.index >= params.size())
            throw std::out_of_range("evaluate_rows: missing parameter");
    }
    // Stack depth never exceeds the node count; one column per stack level.
    thread_local std::vector<double> scratch;
    std::size_t depth = 0, max_depth = 0;
    for (const auto& n : e.nodes()) {
        depth = depth + 1 - static_cast<std::size_t>(arity(n.op));
        max_depth = std::max(max_depth, depth);
    }
    if (scratch.size() < max_depth * rows)
        scratch.resize(max_depth * rows);
    double* base = scratch.data();
    std::size_t top = 0;
    for (const auto& n : e.nodes()) {
        switch (n.op) {
        case Op::Const: {
            double* dst = base + top * rows;
            std::fill(dst, dst + rows, n.value);
            ++top;
            break;
        }
        case Op::Param: {
            double* dst = base + top * rows;
            std::fill(dst, dst + rows, params[n.index]);
            ++top;
            break;
        }
        case Op::Var: {
            double* dst = base + top * rows;
            std::copy_n(columns[n.index].data(), rows, dst);
            ++top;
            break;
        }
        case Op::Exp: {
            double* a = base + (top - 1) * rows;
            for (std::size_t r = 0; r < rows; ++r)
                a[r] = std::exp(a[r]);
            break;
        }
        default: {
            --top;
            double* a = base + (top - 1) * rows;
            const double* b = base + top * rows;
            switch (n.op) {
            case Op::Add:
                for (std::size_t r = 0; r < rows; ++r) a[r] += b[r];
                break;
            case Op::Sub:
                for (std::size_t r = 0; r < rows; ++r) a[r] -= b[r];
                break;
            case Op::Mul:
                for (std::size_t r = 0; r < rows; ++r) a[r] *= b[r];
                break;
            case Op::Div:
                for (std::size_t r = 0; r < rows; ++r) a[r] /= b[r];
                break;
            default:
                break;
            }
            break;
        }
        }
    }
    std::copy_n(base, rows, out.data());
}

// ---------------------------------------------------------------------------
// Calculus

namespace {

bool is_const(const Expr& e, double v)
{
    return e.size() == 1 && e.root().op == Op::Const && e.root().value == v;
}

bool is_any_const(const Expr& e) { return e.size() == 1 && e.root().op == Op::Const; }

}  // namespace

Expr differentiate(const Expr& e, std::size_t var)
{
    const Node& r = e.root();
    switch (r.op) {
    case Op::Const:
    case Op::Param:
        return Expr::constant(0.0);
    case Op::Var:
        return Expr::constant(r.index == var ? 1.0 : 0.0);
    case Op::Exp: {
        const Expr a = e.child();
        return simplify(Expr::binary(Op::Mul, differentiate(a, var), e));
    }
    default:
        break;
    }
    const Expr a = e.left();
    const Expr b = e.right();
    const Expr da = differentiate(a, var);
    const Expr db = differentiate(b, var);
    switch (r.op) {
    case Op::Add:
        return simplify(Expr::binary(Op::Add, da, db));
    case Op::Sub:
        return simplify(Expr::binary(Op::Sub, da, db));
    case Op::Mul:
        return simplify(Expr::binary(Op::Add, Expr::binary(Op::Mul, da, b), Expr::binary(Op::Mul, a, db)));
    case Op::Div: {
        const Expr num = Expr::binary(Op::Sub, Expr::binary(Op::Mul, da, b), Expr::binary(Op::Mul, a, db));
        return simplify(Expr::binary(Op::Div, num, Expr::binary(Op::Mul, b, b)));
    }
    default:
        throw std::logic_error("differentiate: unexpected operator");
    }
}

Expr simplify(const Expr& e)
{
    const Node& r = e.root();
    if (is_leaf(r.op))
        return e;
    if (arity(r.op) == 1) {
        Expr c = simplify(e.child());
        if (is_any_const(c)) {
            const double v = std::exp(c.root().value);
            if (std::isfinite(v))
                return Expr::constant(v);
        }
        return Expr::unary(r.op, c);
    }
    Expr a = simplify(e.left());
    Expr b = simplify(e.right());
    if (is_any_const(a) && is_any_const(b)) {
        const double v = apply(r.op, a.root().value, b.root().value);
        if (std::isfinite(v))
            return Expr::constant(v);
    }
    switch (r.op) {
    case Op::Add:
        if (is_const(a, 0.0)) return b;
        if (is_const(b, 0.0)) return a;
        break;
    case Op::Sub:
        if (is_const(b, 0.0)) return a;
        break;
    case Op::Mul:
        if (is_const(a, 0.0) || is_const(b, 0.0)) return Expr::constant(0.0);
        if (is_const(a, 1.0)) return b;
        if (is_const(b, 1.0)) return a;
        break;
    case Op::Div:
        if (is_const(b, 1.0)) return a;
        if (is_const(a, 0.0)) return Expr::constant(0.0);
        break;
    default:
        break;
    }
    return Expr::binary(r.op, a, b);
}

// ---------------------------------------------------------------------------
// Text form

std::string format_number(double value)
{
    std::array<char, 64> buf;
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

namespace {

int precedence(const Expr& e)
{
    switch (e.root().op) {
    case Op::Add:
    case Op::Sub:
        return 1;
    case Op::Mul:
    case Op::Div:
        return 2;
    default:
        return 3;
    }
}

char symbol(Op op)
{
    switch (op) {
    case Op::Add: return '+';
    case Op::Sub: return '-';
    case Op::Mul: return '*';
    case Op::Div: return '/';
    default: return '?';
    }
}

void emit(const Expr& e, std::span<const std::string> names, std::string& out)
{
    const Node& r = e.root();
    switch (r.op) {
    case Op::Const: {
        const bool neg = std::signbit(r.value);
        if (neg) out += '(';
        out += format_number(r.value);
        if (neg) out += ')';
        return;
    }
    case Op::Param:
        out += "p[" + std::to_string(r.index) + "]";
        return;
    case Op::Var:
        if (r.index < names.size())
            out += names[r.index];
        else
            out += "x" + std::to_string(r.index);
        return;
    case Op::Exp:
        out += "exp(";
        emit(e.child(), names, out);
        out += ')';
        return;
    default:
        break;
    }
    const Expr a = e.left();
    const Expr b = e.right();
    const int p = precedence(e);
    const bool wrap_a = precedence(a) < p;
    const bool wrap_b = precedence(b) <= p;
    if (wrap_a) out += '(';
    emit(a, names, out);
    if (wrap_a) out += ')';
    out += symbol(r.op);
    if (wrap_b) out += '(';
    emit(b, names, out);
    if (wrap_b) out += ')';
}

class Parser {
public:
    Parser(std::string_view text, std::span<const std::string> names) : text_(text), names_(names) {}

    Expr run()
    {
        Expr e = expression();
        skip_ws();
        if (pos_ != text_.size())
            fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(pos_, what); }

    void skip_ws()
    {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n'))
            ++pos_;
    }

    bool peek(char c)
    {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    void expect(char c)
    {
        skip_ws();
        if (pos_ >= text_.size())
            fail(std::string("unexpected end of input, expected '") + c + "'");
        if (text_[pos_] != c)
            fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    Expr expression()
    {
        Expr lhs = term();
        while (true) {
            skip_ws();
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
                const Op op = text_[pos_] == '+' ? Op::Add : Op::Sub;
                ++pos_;
                lhs = Expr::binary(op, lhs, term());
            } else {
                return lhs;
            }
        }
    }

    Expr term()
    {
        Expr lhs = factor();
        while (true) {
            skip_ws();
            if (pos_ < text_.size() && (text_[pos_] == '*' || text_[pos_] == '/')) {
                const Op op = text_[pos_] == '*' ? Op::Mul : Op::Div;
                ++pos_;
                lhs = Expr::binary(op, lhs, factor());
            } else {
                return lhs;
            }
        }
    }

    static bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
    static bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

    double number()
    {
        const char* first = text_.data() + pos_;
        const char* last = text_.data() + text_.size();
        double v = 0.0;
        auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc())
            fail("malformed number");
        pos_ += static_cast<std::size_t>(res.ptr - first);
        return v;
    }

    Expr factor()
    {
        skip_ws();
        if (pos_ >= text_.size())
            fail("unexpected end of input, expected an operand");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expression();
            expect(')');
            return e;
        }
        if (c == '-') {
            const std::size_t at = pos_;
            ++pos_;
            skip_ws();
            if (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
                return Expr::constant(-number());
            pos_ = at;
            fail("unary minus is only supported on numeric literals");
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return Expr::constant(number());
        if (is_ident_start(c)) {
            const std::size_t start = pos_;
            while (pos_ < text_.size() && is_ident_char(text_[pos_]))
                ++pos_;
            const std::string_view ident = text_.substr(start, pos_ - start);
            if (ident == "exp" && peek('(')) {
                ++pos_;
                Expr inner = expression();
                expect(')');
                return Expr::unary(Op::Exp, inner);
            }
            if (ident == "p" && peek('[')) {
                ++pos_;
                skip_ws();
                const std::size_t at = pos_;
                const double v = number();
                if (v < 0 || v != std::floor(v) || v >= static_cast<double>(kMaxNodes)) {
                    pos_ = at;
                    fail("parameter slot must be a non-negative integer");
                }
                expect(']');
                return Expr::param(static_cast<std::size_t>(v));
            }
            for (std::size_t i = 0; i < names_.size(); ++i)
                if (names_[i] == ident)
                    return Expr::variable(i);
            pos_ = start;
            fail("unknown identifier '" + std::string(ident) + "'");
        }
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    std::string_view text_;
    std::span<const std::string> names_;
    std::size_t pos_ = 0;
};

}  // namespace

ParseError::ParseError(std::size_t offset, const std::string& what)
    : std::runtime_error("parse error at offset " + std::to_string(offset) + ": " + what), offset_(offset)
{
}

std::string format(const Expr& e, std::span<const std::string> names)
{
    std::string out;
    emit(e, names, out);
    return out;
}

Expr parse(std::string_view text, std::span<const std::string> names)
{
    return Parser(text, names).run();
}

Expr parse(std::string_view text, const Grammar& grammar)
{
    Expr e = parse(text, std::span<const std::string>(grammar.variables));
    for (const auto& n : e.nodes())
        if (!is_leaf(n.op) && !grammar.allows(n.op))
            throw ParseError(0, "operator '" + std::string(op_name(n.op)) + "' is not in the grammar");
    return e;
}

}  // namespace kinfer
