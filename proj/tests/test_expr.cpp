#include <doctest.h>

#include <cmath>
#include <random>

#include "koopman/error.hpp"
#include "koopman/expr.hpp"

using namespace koopman;

namespace {

Expr var(const char* n) { return Expr::variable(n); }

// Random expressions over {x, y} whose every subexpression is defined on
// [-1, 1]^2: ln and reciprocal only see arguments bounded away from zero.
class ExprGen {
public:
    explicit ExprGen(unsigned seed) : rng_(seed) {}

    Expr operator()(int depth) {
        std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
        switch (pick(rng_)) {
            case 0:
                return Expr::constant(std::uniform_real_distribution<double>(-2.0, 2.0)(rng_));
            case 1:
                return coin() ? var("x") : var("y");
            case 2:
                return Expr::sum({(*this)(depth - 1), (*this)(depth - 1)});
            case 3:
                return Expr::product({(*this)(depth - 1), (*this)(depth - 1)});
            case 4:
                return Expr::power((*this)(depth - 1), std::uniform_int_distribution<int>(0, 3)(rng_));
            case 5:
                return Expr::sin((*this)(depth - 1));
            case 6:
                return Expr::cos((*this)(depth - 1));
            case 7:
                return Expr::exp(Expr::sin((*this)(depth - 1)));
            case 8:
                return Expr::ln(Expr::sum({Expr::constant(1.5), Expr::sin((*this)(depth - 1))}));
            default:
                return Expr::reciprocal(Expr::sum({Expr::constant(2.0), Expr::cos((*this)(depth - 1))}));
        }
    }

    Env point() {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        return Env{{"x", u(rng_)}, {"y", u(rng_)}};
    }

private:
    bool coin() { return std::uniform_int_distribution<int>(0, 1)(rng_) == 1; }
    std::mt19937 rng_;
};

}  // namespace

TEST_CASE("parse builds the expected trees") {
    CHECK(parse("sin(x1)") == Expr::sin(var("x1")));

    Expr e = parse("k1 + k2*cos(x1) + k3*sin(x1)");
    REQUIRE(e.kind() == NodeKind::Sum);
    REQUIRE(e.args().size() == 3);
    CHECK(e.arg(0) == var("k1"));
    CHECK(e.arg(1) == Expr::product({var("k2"), Expr::cos(var("x1"))}));
    CHECK(e.arg(2) == Expr::product({var("k3"), Expr::sin(var("x1"))}));

    CHECK(simplify(parse("1/(1+exp(x))")) ==
          Expr::reciprocal(Expr::sum({Expr::constant(1), Expr::exp(var("x"))})));
}

TEST_CASE("parse precedence") {
    // ^ binds tighter than unary minus
    CHECK(simplify(parse("-x^2")) == simplify(Expr::product({Expr::constant(-1), Expr::power(var("x"), 2)})));
    CHECK(evaluate(parse("2 - 3 - 4"), {}) == -5.0);
    CHECK(evaluate(parse("8 / 2 / 2"), {}) == 2.0);
    CHECK(evaluate(parse("2*3^2"), {}) == 18.0);
    CHECK(evaluate(parse("x^-1"), {{"x", 4.0}}) == 0.25);
    CHECK(evaluate(parse("1e-3*x"), {{"x", 2.0}}) == doctest::Approx(2e-3));
}

TEST_CASE("parse errors carry offsets") {
    try {
        parse("1 + foo(x)");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 4);
        CHECK(std::string(e.what()).find("unknown function") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("x^1.5"), ParseError);
    CHECK_THROWS_AS(parse("x^y"), ParseError);
    CHECK_THROWS_AS(parse("(x + 1"), ParseError);
    CHECK_THROWS_AS(parse("x +"), ParseError);
    CHECK_THROWS_AS(parse("x $ y"), ParseError);
    CHECK_THROWS_AS(parse(""), ParseError);
}

TEST_CASE("evaluate") {
    CHECK(evaluate(Expr::sin(var("x")), {{"x", 0.0}}) == 0.0);
    CHECK(evaluate(parse("x^2*y"), {{"x", 2.0}, {"y", 3.0}}) == 12.0);
    // fixed point of the shifted machine model
    Env k{{"k1", 0.5667}, {"k2", -0.5667}, {"k3", -2.0843}, {"x", 0.0}};
    CHECK(evaluate(parse("k1 + k2*cos(x) + k3*sin(x)"), k) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("evaluate reports unbound variables and domain violations") {
    CHECK_THROWS_AS(evaluate(parse("x + y"), {{"x", 1.0}}), EvalError);
    CHECK_THROWS_AS(evaluate(parse("ln(x)"), {{"x", 0.0}}), EvalError);
    CHECK_THROWS_AS(evaluate(parse("ln(x)"), {{"x", -1.0}}), EvalError);
    CHECK_THROWS_AS(evaluate(parse("1/x"), {{"x", 0.0}}), EvalError);
    CHECK_THROWS_AS(evaluate(parse("x^-2"), {{"x", 0.0}}), EvalError);
}

TEST_CASE("differentiate table rules") {
    CHECK(differentiate(parse("sin(x)"), "x") == Expr::cos(var("x")));
    // d/dx 1/(k+x) = -1/(k+x)^2
    Expr r = parse("1/(k+x)");
    Expr expected = simplify(Expr::product({Expr::constant(-1), Expr::power(simplify(r), 2)}));
    CHECK(differentiate(r, "x") == expected);
    CHECK(differentiate(Expr::constant(3.0), "x").is_constant(0.0));
    CHECK(differentiate(parse("k*y"), "x").is_constant(0.0));
    CHECK(differentiate(parse("exp(x)"), "x") == Expr::exp(var("x")));
    CHECK(differentiate(parse("ln(x)"), "x") == Expr::reciprocal(var("x")));
}

TEST_CASE("differentiate agrees with central differences") {
    ExprGen gen(20240611u);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Expr e = gen(3);
        Env at = gen.point();
        const char* v = trial % 2 == 0 ? "x" : "y";
        double symbolic = evaluate(differentiate(e, v), at);
        const double h = 1e-5;
        Env plus = at, minus = at;
        plus[v] += h;
        minus[v] -= h;
        double numeric = (evaluate(e, plus) - evaluate(e, minus)) / (2 * h);
        INFO("expr: ", to_string(e));
        CHECK(std::abs(symbolic - numeric) <= 1e-6 * (1 + std::abs(symbolic)));
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("simplify basics") {
    CHECK(simplify(Expr::product({Expr::constant(1), Expr::sin(var("x"))})) == Expr::sin(var("x")));
    CHECK(simplify(Expr::sum({Expr::constant(2), Expr::constant(3)})).is_constant(5.0));
    Expr c = Expr::cos(var("x"));
    CHECK(simplify(Expr::product({c, Expr::power(c, 1)})) == Expr::power(c, 2));
    CHECK(simplify(parse("x - x")).is_constant(0.0));
    CHECK(simplify(parse("0*sin(x) + y")) == var("y"));
    CHECK(simplify(parse("(x^2)^3")) == Expr::power(var("x"), 6));
    CHECK(simplify(parse("((x + y) + (1 + 2))")) == simplify(parse("3 + x + y")));
    CHECK(simplify(parse("x*y")) == simplify(parse("y*x")));
    CHECK(simplify(parse("2*x + 3*x")) == simplify(parse("5*x")));
}

TEST_CASE("simplify preserves value") {
    ExprGen gen(7u);
    for (int trial = 0; trial < 200; ++trial) {
        Expr e = gen(4);
        Env at = gen.point();
        double a = evaluate(e, at);
        double b = evaluate(simplify(e), at);
        INFO("expr: ", to_string(e));
        CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("print then parse is the identity after simplify") {
    ExprGen gen(99u);
    for (int trial = 0; trial < 200; ++trial) {
        Expr e = gen(4);
        std::string text = to_string(e);
        INFO("text: ", text);
        CHECK(simplify(parse(text)) == simplify(e));
        Expr s = simplify(e);
        CHECK(simplify(parse(to_string(s))) == s);
    }
    CHECK(to_string(simplify(parse("x - 2*y"))) == "x - 2*y");
    CHECK(to_string(simplify(parse("1/(1 + exp(x))"))) == "1/(1 + exp(x))");
}

TEST_CASE("is_polynomial") {
    CHECK(is_polynomial(parse("x^2 + 3*x*y"), {"x", "y"}));
    CHECK_FALSE(is_polynomial(parse("sin(x)"), {"x"}));
    CHECK(is_polynomial(parse("z2*z4"), {"z1", "z2", "z3", "z4"}));
    CHECK_FALSE(is_polynomial(parse("x^-1"), {"x"}));
    CHECK_FALSE(is_polynomial(parse("1/(1 + x)"), {"x"}));
    // parameters, including parameter-only transcendental factors
    CHECK(is_polynomial(parse("(k1 + k2*x - D/ws*y)/M"), {"x", "y"}));
    CHECK(is_polynomial(parse("cos(a)*x"), {"x"}));
}

TEST_CASE("substitute and free variables") {
    Expr e = parse("z1*z2 + x");
    Expr s = substitute(e, {{"z1", parse("exp(x)")}, {"z2", parse("1/(1 + exp(x))")}});
    CHECK(evaluate(s, {{"x", 0.0}}) == doctest::Approx(0.5));
    CHECK(free_variables(s) == std::set<std::string>{"x"});
    CHECK(depends_on(e, {"z2"}));
    CHECK_FALSE(depends_on(e, {"y"}));
}

TEST_CASE("compiled evaluation matches the tree walker") {
    ExprGen gen(3u);
    std::vector<std::string> slots{"x", "y"};
    for (int trial = 0; trial < 100; ++trial) {
        Expr e = gen(4);
        Env at = gen.point();
        CompiledExpr c(e, slots, {});
        double xs[2] = {at["x"], at["y"]};
        CHECK(c(xs) == doctest::Approx(evaluate(e, at)).epsilon(1e-13));
    }
    CompiledExpr with_param(parse("k*x"), slots, {{"k", 3.0}});
    double xs[2] = {2.0, 0.0};
    CHECK(with_param(xs) == 6.0);
    CHECK_THROWS_AS(CompiledExpr(parse("q*x"), slots, {}), EvalError);
}
