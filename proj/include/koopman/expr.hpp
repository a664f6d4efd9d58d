#pragma once

// Symbolic expression trees over named real variables.
//
// An Expr is an immutable, reference-counted tree. Copies are cheap and
// share structure, so values can be passed around and shared between
// threads freely. Parameters (masses, gains, ...) are ordinary variables
// bound at evaluation time; differentiating with respect to a state treats
// every other variable as a constant.

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace koopman {

enum class NodeKind : std::uint8_t {
    Constant,
    Variable,
    Sum,
    Product,
    Power,
    Sin,
    Cos,
    Exp,
    Ln,
    Reciprocal,
};

class Expr {
public:
    // The constant 0.
    Expr();

    static Expr constant(double value);
    static Expr variable(std::string name);
    // Throws InvalidArgument on an empty term list.
    static Expr sum(std::vector<Expr> terms);
    static Expr product(std::vector<Expr> factors);
    static Expr power(Expr base, int exponent);
    static Expr sin(Expr arg);
    static Expr cos(Expr arg);
    static Expr exp(Expr arg);
    static Expr ln(Expr arg);
    static Expr reciprocal(Expr arg);

    NodeKind kind() const;
    double value() const;             // Constant only
    const std::string& name() const;  // Variable only
    int exponent() const;             // Power only
    // Sum terms, Product factors, Power base, or the single argument of a
    // unary function node. Empty for leaves.
    std::span<const Expr> args() const;
    const Expr& arg(std::size_t i = 0) const { return args()[i]; }

    bool is_constant() const { return kind() == NodeKind::Constant; }
    bool is_constant(double v) const { return is_constant() && value() == v; }
    bool is_variable() const { return kind() == NodeKind::Variable; }
    bool is_transcendental() const;

private:
    struct Node;
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    static Expr make_unary(NodeKind kind, Expr arg);
    std::shared_ptr<const Node> node_;
};

// Total structural order: negative, zero or positive like strcmp.
int compare(const Expr& a, const Expr& b);
inline bool operator==(const Expr& a, const Expr& b) { return compare(a, b) == 0; }
inline bool operator<(const Expr& a, const Expr& b) { return compare(a, b) < 0; }

// Unsimplified builders.
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

using Env = std::map<std::string, double, std::less<>>;

// Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | factor
//   factor := atom ('^' ['-'] integer)?
//   atom   := number | ident | ident '(' expr ')' | '(' expr ')'
// Functions: sin cos exp ln. Throws ParseError with the byte offset.
Expr parse(std::string_view text);

// Inverse of parse; numbers use the shortest representation that
// round-trips exactly.
std::string to_string(const Expr& e);

double evaluate(const Expr& e, const Env& env);

Expr differentiate(const Expr& e, std::string_view var);

// Constant folding, 0/1 elimination, flattening of nested sums and
// products, merging of repeated factors into powers and of like terms.
// Factors inside products are put in canonical order.
Expr simplify(const Expr& e);

// True when every node of simplify(e) is a constant, a variable, a sum, a
// product or a nonnegative integer power of a polynomial. Variables outside
// `vars` are parameters; a transcendental node whose argument involves no
// variable of `vars` is a parameter-valued coefficient.
bool is_polynomial(const Expr& e, const std::set<std::string>& vars);

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& replacements);

std::set<std::string> free_variables(const Expr& e);
bool depends_on(const Expr& e, const std::set<std::string>& vars);

// Expression lowered to a postfix program with variables resolved to slot
// indices, for tight evaluation loops (integrators, dictionaries).
class CompiledExpr {
public:
    CompiledExpr() = default;
    // `slots` names the entries of the vector passed to operator(); any
    // other free variable must be bound in `constants`.
    CompiledExpr(const Expr& e, std::span<const std::string> slots, const Env& constants);

    double operator()(std::span<const double> x) const;

private:
    struct Instr {
        NodeKind op;
        std::uint32_t count;  // argument count for Sum/Product, slot for Variable
        int exponent;
        double value;
    };
    std::vector<Instr> code_;
    std::size_t max_stack_ = 0;
};

}  // namespace koopman
