#include "koopman/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <utility>

#include "koopman/error.hpp"

namespace koopman {

struct Expr::Node {
    NodeKind kind = NodeKind::Constant;
    double value = 0.0;
    std::string name;
    int exponent = 0;
    std::vector<Expr> args;
};

Expr::Expr() : node_(std::make_shared<Node>()) {}

Expr Expr::constant(double value) {
    auto n = std::make_shared<Node>();
    n->value = value;
    return Expr(std::move(n));
}

Expr Expr::variable(std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Variable;
    n->name = std::move(name);
    return Expr(std::move(n));
}

Expr Expr::sum(std::vector<Expr> terms) {
    if (terms.empty()) throw InvalidArgument("sum of zero terms");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Sum;
    n->args = std::move(terms);
    return Expr(std::move(n));
}

Expr Expr::product(std::vector<Expr> factors) {
    if (factors.empty()) throw InvalidArgument("product of zero factors");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Product;
    n->args = std::move(factors);
    return Expr(std::move(n));
}

Expr Expr::power(Expr base, int exponent) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Power;
    n->exponent = exponent;
    n->args.push_back(std::move(base));
    return Expr(std::move(n));
}

Expr Expr::make_unary(NodeKind kind, Expr arg) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->args.push_back(std::move(arg));
    return Expr(std::move(n));
}

Expr Expr::sin(Expr arg) { return make_unary(NodeKind::Sin, std::move(arg)); }
Expr Expr::cos(Expr arg) { return make_unary(NodeKind::Cos, std::move(arg)); }
Expr Expr::exp(Expr arg) { return make_unary(NodeKind::Exp, std::move(arg)); }
Expr Expr::ln(Expr arg) { return make_unary(NodeKind::Ln, std::move(arg)); }
Expr Expr::reciprocal(Expr arg) { return make_unary(NodeKind::Reciprocal, std::move(arg)); }

NodeKind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
int Expr::exponent() const { return node_->exponent; }
std::span<const Expr> Expr::args() const { return node_->args; }

bool Expr::is_transcendental() const {
    switch (kind()) {
        case NodeKind::Sin:
        case NodeKind::Cos:
        case NodeKind::Exp:
        case NodeKind::Ln:
        case NodeKind::Reciprocal:
            return true;
        default:
            return false;
    }
}

int compare(const Expr& a, const Expr& b) {
    if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
    switch (a.kind()) {
        case NodeKind::Constant:
            if (a.value() == b.value()) return 0;
            return a.value() < b.value() ? -1 : 1;
        case NodeKind::Variable:
            return a.name().compare(b.name()) < 0 ? -1 : (a.name() == b.name() ? 0 : 1);
        case NodeKind::Power:
            if (int c = compare(a.arg(), b.arg()); c != 0) return c;
            if (a.exponent() == b.exponent()) return 0;
            return a.exponent() < b.exponent() ? -1 : 1;
        default: {
            auto x = a.args();
            auto y = b.args();
            for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
                if (int c = compare(x[i], y[i]); c != 0) return c;
            }
            if (x.size() == y.size()) return 0;
            return x.size() < y.size() ? -1 : 1;
        }
    }
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::sum({a, -b}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::product({a, Expr::reciprocal(b)}); }
Expr operator-(const Expr& a) {
    if (a.is_constant()) return Expr::constant(-a.value());
    return Expr::product({Expr::constant(-1.0), a});
}

// ---------------------------------------------------------------- parsing

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr parse_all() {
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expr parse_expr() {
        std::vector<Expr> terms{parse_term()};
        while (true) {
            if (accept('+')) {
                terms.push_back(parse_term());
            } else if (accept('-')) {
                terms.push_back(-parse_term());
            } else {
                break;
            }
        }
        return terms.size() == 1 ? terms.front() : Expr::sum(std::move(terms));
    }

    Expr parse_term() {
        std::vector<Expr> factors{parse_unary()};
        while (true) {
            if (accept('*')) {
                factors.push_back(parse_unary());
            } else if (accept('/')) {
                Expr den = parse_unary();
                if (den.is_constant() && den.value() != 0.0) {
                    factors.push_back(Expr::constant(1.0 / den.value()));
                } else {
                    factors.push_back(Expr::reciprocal(den));
                }
            } else {
                break;
            }
        }
        return factors.size() == 1 ? factors.front() : Expr::product(std::move(factors));
    }

    Expr parse_unary() {
        if (accept('-')) return -parse_unary();
        return parse_factor();
    }

    Expr parse_factor() {
        Expr base = parse_atom();
        if (!accept('^')) return base;
        skip_ws();
        bool negative = false;
        if (pos_ < text_.size() && text_[pos_] == '-') {
            negative = true;
            ++pos_;
            skip_ws();
        }
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (start == pos_) fail("exponent must be an integer literal");
        if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
            fail("non-integer exponent");
        }
        int k = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, k);
        if (ec != std::errc()) fail("exponent out of range");
        return Expr::power(std::move(base), negative ? -k : k);
    }

    Expr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr inner = parse_expr();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            std::string ident(text_.substr(start, pos_ - start));
            std::size_t after_ident = pos_;
            if (accept('(')) {
                Expr arg = parse_expr();
                if (!accept(')')) fail("expected ')'");
                if (ident == "sin") return Expr::sin(arg);
                if (ident == "cos") return Expr::cos(arg);
                if (ident == "exp") return Expr::exp(arg);
                if (ident == "ln") return Expr::ln(arg);
                pos_ = start;
                fail("unknown function '" + ident + "'");
            }
            pos_ = after_ident;
            return Expr::variable(std::move(ident));
        }
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    Expr parse_number() {
        std::size_t start = pos_;
        auto digits = [&] {
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        };
        digits();
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            digits();
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            std::size_t exp_start = pos_;
            digits();
            if (exp_start == pos_) pos_ = mark;  // "2e" is 2 followed by an identifier
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
        if (ec != std::errc() || ptr != text_.data() + pos_) {
            pos_ = start;
            fail("malformed number");
        }
        return Expr::constant(v);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).parse_all(); }

// --------------------------------------------------------------- printing

namespace {

std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// Binding strength required by the surrounding context.
enum Level { kSumLevel = 0, kProductLevel = 1, kPowerLevel = 2, kAtomLevel = 3 };

bool leading_negative(const Expr& e) {
    if (e.is_constant()) return e.value() < 0.0;
    if (e.kind() == NodeKind::Product) return e.arg(0).is_constant() && e.arg(0).value() < 0.0;
    return false;
}

Expr negate_term(const Expr& e) {
    if (e.is_constant()) return Expr::constant(-e.value());
    auto f = e.args();
    double c = -f[0].value();
    std::vector<Expr> rest(f.begin() + 1, f.end());
    if (c != 1.0) rest.insert(rest.begin(), Expr::constant(c));
    if (rest.size() == 1) return rest.front();
    return Expr::product(std::move(rest));
}

void print(const Expr& e, Level ctx, std::string& out);

void print_product(const Expr& e, std::string& out) {
    auto f = e.args();
    std::size_t i = 0;
    std::string coefficient;
    if (f[0].is_constant()) {
        double c = f[0].value();
        i = 1;
        if (c == -1.0) {
            coefficient = "-";
        } else if (c != 1.0 || f.size() == 1) {
            coefficient = format_number(c) + "*";
        }
    }
    std::vector<const Expr*> num;
    std::vector<const Expr*> den;
    for (; i < f.size(); ++i) {
        if (f[i].kind() == NodeKind::Reciprocal) {
            den.push_back(&f[i]);
        } else {
            num.push_back(&f[i]);
        }
    }
    if (num.empty()) {
        // "-1/x", "2/x", "1/x"
        if (coefficient == "-") {
            coefficient = "-1";
        } else if (coefficient.empty()) {
            coefficient = "1";
        } else {
            coefficient.pop_back();
        }
        out += coefficient;
    } else {
        out += coefficient;
        for (std::size_t k = 0; k < num.size(); ++k) {
            if (k > 0) out += '*';
            print(*num[k], kPowerLevel, out);
        }
    }
    for (const Expr* d : den) {
        out += '/';
        print(d->arg(), kPowerLevel, out);
    }
}

Level own_level(const Expr& e) {
    switch (e.kind()) {
        case NodeKind::Constant:
            return e.value() < 0.0 ? kSumLevel : kAtomLevel;
        case NodeKind::Variable:
        case NodeKind::Sin:
        case NodeKind::Cos:
        case NodeKind::Exp:
        case NodeKind::Ln:
            return kAtomLevel;
        case NodeKind::Power:
            return kPowerLevel;
        case NodeKind::Product:
            return leading_negative(e) ? kSumLevel : kProductLevel;
        case NodeKind::Reciprocal:
            return kProductLevel;
        case NodeKind::Sum:
            return kSumLevel;
    }
    return kSumLevel;
}

void print(const Expr& e, Level ctx, std::string& out) {
    bool parens = own_level(e) < ctx;
    if (parens) out += '(';
    switch (e.kind()) {
        case NodeKind::Constant:
            out += format_number(e.value());
            break;
        case NodeKind::Variable:
            out += e.name();
            break;
        case NodeKind::Sum: {
            auto t = e.args();
            print(t[0], kSumLevel, out);
            for (std::size_t i = 1; i < t.size(); ++i) {
                if (leading_negative(t[i])) {
                    out += " - ";
                    print(negate_term(t[i]), kProductLevel, out);
                } else {
                    out += " + ";
                    print(t[i], kProductLevel, out);
                }
            }
            break;
        }
        case NodeKind::Product:
            print_product(e, out);
            break;
        case NodeKind::Power:
            print(e.arg(), kAtomLevel, out);
            out += '^';
            out += std::to_string(e.exponent());
            break;
        case NodeKind::Sin:
        case NodeKind::Cos:
        case NodeKind::Exp:
        case NodeKind::Ln: {
            static constexpr const char* names[] = {"sin(", "cos(", "exp(", "ln("};
            out += names[static_cast<int>(e.kind()) - static_cast<int>(NodeKind::Sin)];
            print(e.arg(), kSumLevel, out);
            out += ')';
            break;
        }
        case NodeKind::Reciprocal:
            out += "1/";
            print(e.arg(), kPowerLevel, out);
            break;
    }
    if (parens) out += ')';
}

}  // namespace

std::string to_string(const Expr& e) {
    std::string out;
    print(e, kSumLevel, out);
    return out;
}

// ------------------------------------------------------------- evaluation

namespace {

double checked_ln(double a) {
    if (!(a > 0.0)) throw EvalError("ln of nonpositive value " + format_number(a));
    return std::log(a);
}

double checked_reciprocal(double a) {
    if (a == 0.0) throw EvalError("division by zero");
    return 1.0 / a;
}

double checked_pow(double b, int k) {
    if (k < 0 && b == 0.0) throw EvalError("division by zero in negative power");
    return std::pow(b, k);
}

}  // namespace

double evaluate(const Expr& e, const Env& env) {
    switch (e.kind()) {
        case NodeKind::Constant:
            return e.value();
        case NodeKind::Variable: {
            auto it = env.find(e.name());
            if (it == env.end()) throw EvalError("unbound variable '" + e.name() + "'");
            return it->second;
        }
        case NodeKind::Sum: {
            double s = 0.0;
            for (const Expr& t : e.args()) s += evaluate(t, env);
            return s;
        }
        case NodeKind::Product: {
            double p = 1.0;
            for (const Expr& f : e.args()) p *= evaluate(f, env);
            return p;
        }
        case NodeKind::Power:
            return checked_pow(evaluate(e.arg(), env), e.exponent());
        case NodeKind::Sin:
            return std::sin(evaluate(e.arg(), env));
        case NodeKind::Cos:
            return std::cos(evaluate(e.arg(), env));
        case NodeKind::Exp:
            return std::exp(evaluate(e.arg(), env));
        case NodeKind::Ln:
            return checked_ln(evaluate(e.arg(), env));
        case NodeKind::Reciprocal:
            return checked_reciprocal(evaluate(e.arg(), env));
    }
    return 0.0;
}

// --------------------------------------------------------- simplification

namespace {

void flatten_into(NodeKind kind, const Expr& e, std::vector<Expr>& out) {
    if (e.kind() == kind) {
        for (const Expr& a : e.args()) out.push_back(a);
    } else {
        out.push_back(e);
    }
}

Expr simplify_product(std::vector<Expr> factors);

// coefficient * rest, with rest a product of the remaining factors
Expr scaled(double c, const Expr& rest) {
    if (c == 1.0) return rest;
    std::vector<Expr> f{Expr::constant(c)};
    flatten_into(NodeKind::Product, rest, f);
    return Expr::product(std::move(f));
}

Expr simplify_sum(std::vector<Expr> terms) {
    std::vector<Expr> flat;
    for (const Expr& t : terms) flatten_into(NodeKind::Sum, t, flat);

    double constant = 0.0;
    std::vector<std::pair<Expr, double>> like;  // (monomial part, coefficient), first-seen order
    for (const Expr& t : flat) {
        if (t.is_constant()) {
            constant += t.value();
            continue;
        }
        double c = 1.0;
        Expr rest = t;
        if (t.kind() == NodeKind::Product && t.arg(0).is_constant()) {
            c = t.arg(0).value();
            auto f = t.args().subspan(1);
            rest = f.size() == 1 ? f[0] : Expr::product(std::vector<Expr>(f.begin(), f.end()));
        }
        auto it = std::find_if(like.begin(), like.end(), [&](const auto& p) { return p.first == rest; });
        if (it == like.end()) {
            like.emplace_back(rest, c);
        } else {
            it->second += c;
        }
    }

    std::vector<Expr> out;
    if (constant != 0.0) out.push_back(Expr::constant(constant));
    for (const auto& [rest, c] : like) {
        if (c != 0.0) out.push_back(scaled(c, rest));
    }
    if (out.empty()) return Expr::constant(0.0);
    if (out.size() == 1) return out.front();
    return Expr::sum(std::move(out));
}

Expr simplify_power(const Expr& base, int k) {
    if (k == 0) return Expr::constant(1.0);
    if (base.is_constant()) {
        if (!(k < 0 && base.value() == 0.0)) return Expr::constant(std::pow(base.value(), k));
        return Expr::power(base, k);
    }
    if (k == 1) return base;
    if (base.kind() == NodeKind::Power) return simplify_power(base.arg(), base.exponent() * k);
    if (base.kind() == NodeKind::Product) {
        std::vector<Expr> f;
        for (const Expr& b : base.args()) f.push_back(simplify_power(b, k));
        return simplify_product(std::move(f));
    }
    return Expr::power(base, k);
}

Expr simplify_product(std::vector<Expr> factors) {
    std::vector<Expr> flat;
    for (const Expr& f : factors) flatten_into(NodeKind::Product, f, flat);

    double coefficient = 1.0;
    std::vector<std::pair<Expr, int>> powers;  // (base, exponent)
    for (const Expr& f : flat) {
        if (f.is_constant()) {
            coefficient *= f.value();
            continue;
        }
        Expr base = f;
        int k = 1;
        if (f.kind() == NodeKind::Power) {
            base = f.arg();
            k = f.exponent();
        }
        auto it = std::find_if(powers.begin(), powers.end(), [&](const auto& p) { return p.first == base; });
        if (it == powers.end()) {
            powers.emplace_back(base, k);
        } else {
            it->second += k;
        }
    }
    if (coefficient == 0.0) return Expr::constant(0.0);

    std::sort(powers.begin(), powers.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Expr> out;
    for (const auto& [base, k] : powers) {
        if (k == 0) continue;
        Expr p = simplify_power(base, k);
        if (p.is_constant()) {
            coefficient *= p.value();
        } else {
            out.push_back(p);
        }
    }
    if (out.empty()) return Expr::constant(coefficient);
    if (coefficient != 1.0) out.insert(out.begin(), Expr::constant(coefficient));
    if (out.size() == 1) return out.front();
    return Expr::product(std::move(out));
}

Expr fold_unary(NodeKind kind, const Expr& a) {
    if (a.is_constant()) {
        double v = a.value();
        switch (kind) {
            case NodeKind::Sin:
                return Expr::constant(std::sin(v));
            case NodeKind::Cos:
                return Expr::constant(std::cos(v));
            case NodeKind::Exp:
                return Expr::constant(std::exp(v));
            case NodeKind::Ln:
                if (v > 0.0) return Expr::constant(std::log(v));
                break;
            case NodeKind::Reciprocal:
                if (v != 0.0) return Expr::constant(1.0 / v);
                break;
            default:
                break;
        }
    }
    switch (kind) {
        case NodeKind::Sin:
            return Expr::sin(a);
        case NodeKind::Cos:
            return Expr::cos(a);
        case NodeKind::Exp:
            return Expr::exp(a);
        case NodeKind::Ln:
            return Expr::ln(a);
        default:
            if (a.kind() == NodeKind::Reciprocal) return a.arg();
            return Expr::reciprocal(a);
    }
}

}  // namespace

Expr simplify(const Expr& e) {
    switch (e.kind()) {
        case NodeKind::Constant:
        case NodeKind::Variable:
            return e;
        case NodeKind::Sum: {
            std::vector<Expr> t;
            for (const Expr& a : e.args()) t.push_back(simplify(a));
            return simplify_sum(std::move(t));
        }
        case NodeKind::Product: {
            std::vector<Expr> f;
            for (const Expr& a : e.args()) f.push_back(simplify(a));
            return simplify_product(std::move(f));
        }
        case NodeKind::Power:
            return simplify_power(simplify(e.arg()), e.exponent());
        default:
            return fold_unary(e.kind(), simplify(e.arg()));
    }
}

// --------------------------------------------------------- differentiation

namespace {

bool mentions(const Expr& e, std::string_view var) {
    if (e.is_variable()) return e.name() == var;
    for (const Expr& a : e.args()) {
        if (mentions(a, var)) return true;
    }
    return false;
}

Expr d(const Expr& e, std::string_view var) {
    if (!mentions(e, var)) return Expr::constant(0.0);
    switch (e.kind()) {
        case NodeKind::Constant:
            return Expr::constant(0.0);
        case NodeKind::Variable:
            return Expr::constant(1.0);
        case NodeKind::Sum: {
            std::vector<Expr> t;
            for (const Expr& a : e.args()) {
                if (mentions(a, var)) t.push_back(d(a, var));
            }
            return Expr::sum(std::move(t));
        }
        case NodeKind::Product: {
            auto f = e.args();
            std::vector<Expr> terms;
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (!mentions(f[i], var)) continue;
                std::vector<Expr> p(f.begin(), f.end());
                p[i] = d(f[i], var);
                terms.push_back(Expr::product(std::move(p)));
            }
            return Expr::sum(std::move(terms));
        }
        case NodeKind::Power: {
            int k = e.exponent();
            return Expr::product({Expr::constant(k), Expr::power(e.arg(), k - 1), d(e.arg(), var)});
        }
        case NodeKind::Sin:
            return Expr::product({Expr::cos(e.arg()), d(e.arg(), var)});
        case NodeKind::Cos:
            return Expr::product({Expr::constant(-1.0), Expr::sin(e.arg()), d(e.arg(), var)});
        case NodeKind::Exp:
            return Expr::product({e, d(e.arg(), var)});
        case NodeKind::Ln:
            return Expr::product({Expr::reciprocal(e.arg()), d(e.arg(), var)});
        case NodeKind::Reciprocal:
            return Expr::product({Expr::constant(-1.0), Expr::power(e, 2), d(e.arg(), var)});
    }
    return Expr::constant(0.0);
}

}  // namespace

Expr differentiate(const Expr& e, std::string_view var) { return simplify(d(e, var)); }

// ----------------------------------------------------------------- queries

bool depends_on(const Expr& e, const std::set<std::string>& vars) {
    if (e.is_variable()) return vars.count(e.name()) != 0;
    for (const Expr& a : e.args()) {
        if (depends_on(a, vars)) return true;
    }
    return false;
}

namespace {

bool polynomial_node(const Expr& e, const std::set<std::string>& vars) {
    switch (e.kind()) {
        case NodeKind::Constant:
        case NodeKind::Variable:
            return true;
        case NodeKind::Sum:
        case NodeKind::Product:
            for (const Expr& a : e.args()) {
                if (!polynomial_node(a, vars)) return false;
            }
            return true;
        case NodeKind::Power:
            if (!depends_on(e.arg(), vars)) return true;
            return e.exponent() >= 0 && polynomial_node(e.arg(), vars);
        default:
            return !depends_on(e.arg(), vars);
    }
}

void collect_variables(const Expr& e, std::set<std::string>& out) {
    if (e.is_variable()) out.insert(e.name());
    for (const Expr& a : e.args()) collect_variables(a, out);
}

}  // namespace

bool is_polynomial(const Expr& e, const std::set<std::string>& vars) {
    return polynomial_node(simplify(e), vars);
}

std::set<std::string> free_variables(const Expr& e) {
    std::set<std::string> out;
    collect_variables(e, out);
    return out;
}

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& replacements) {
    switch (e.kind()) {
        case NodeKind::Constant:
            return e;
        case NodeKind::Variable: {
            auto it = replacements.find(e.name());
            return it == replacements.end() ? e : it->second;
        }
        case NodeKind::Sum:
        case NodeKind::Product: {
            std::vector<Expr> a;
            for (const Expr& x : e.args()) a.push_back(substitute(x, replacements));
            return e.kind() == NodeKind::Sum ? Expr::sum(std::move(a)) : Expr::product(std::move(a));
        }
        case NodeKind::Power:
            return Expr::power(substitute(e.arg(), replacements), e.exponent());
        default:
            return fold_unary(e.kind(), substitute(e.arg(), replacements));
    }
}

// ------------------------------------------------------------ compilation

CompiledExpr::CompiledExpr(const Expr& e, std::span<const std::string> slots, const Env& constants) {
    std::size_t depth = 0;
    auto emit = [&](auto&& self, const Expr& x) -> void {
        switch (x.kind()) {
            case NodeKind::Constant:
                code_.push_back({NodeKind::Constant, 0, 0, x.value()});
                ++depth;
                break;
            case NodeKind::Variable: {
                auto it = std::find(slots.begin(), slots.end(), x.name());
                if (it != slots.end()) {
                    code_.push_back(
                        {NodeKind::Variable, static_cast<std::uint32_t>(it - slots.begin()), 0, 0.0});
                } else {
                    auto c = constants.find(x.name());
                    if (c == constants.end()) throw EvalError("unbound variable '" + x.name() + "'");
                    code_.push_back({NodeKind::Constant, 0, 0, c->second});
                }
                ++depth;
                break;
            }
            default:
                for (const Expr& a : x.args()) self(self, a);
                code_.push_back({x.kind(), static_cast<std::uint32_t>(x.args().size()), x.exponent(), 0.0});
                depth -= x.args().size() - 1;
                break;
        }
        max_stack_ = std::max(max_stack_, depth);
    };
    emit(emit, e);
}

double CompiledExpr::operator()(std::span<const double> x) const {
    constexpr std::size_t kInline = 32;
    double inline_stack[kInline];
    std::vector<double> heap;
    double* stack = inline_stack;
    if (max_stack_ > kInline) {
        heap.resize(max_stack_);
        stack = heap.data();
    }
    std::size_t top = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
            case NodeKind::Constant:
                stack[top++] = in.value;
                break;
            case NodeKind::Variable:
                stack[top++] = x[in.count];
                break;
            case NodeKind::Sum: {
                double s = 0.0;
                for (std::uint32_t i = 0; i < in.count; ++i) s += stack[--top];
                stack[top++] = s;
                break;
            }
            case NodeKind::Product: {
                double p = 1.0;
                for (std::uint32_t i = 0; i < in.count; ++i) p *= stack[--top];
                stack[top++] = p;
                break;
            }
            case NodeKind::Power:
                stack[top - 1] = checked_pow(stack[top - 1], in.exponent);
                break;
            case NodeKind::Sin:
                stack[top - 1] = std::sin(stack[top - 1]);
                break;
            case NodeKind::Cos:
                stack[top - 1] = std::cos(stack[top - 1]);
                break;
            case NodeKind::Exp:
                stack[top - 1] = std::exp(stack[top - 1]);
                break;
            case NodeKind::Ln:
                stack[top - 1] = checked_ln(stack[top - 1]);
                break;
            case NodeKind::Reciprocal:
                stack[top - 1] = checked_reciprocal(stack[top - 1]);
                break;
        }
    }
    return top == 1 ? stack[0] : 0.0;
}

}  // namespace koopman
