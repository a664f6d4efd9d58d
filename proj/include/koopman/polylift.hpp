#pragma once

// Polynomialization of nonpolynomial ODE systems and the observable
// dictionaries built on top of it.
//
// Every elementary subterm (sin, cos, exp, ln, reciprocal, negative power)
// of the right-hand side is replaced by an auxiliary variable z = h(x) whose
// own ODE is obtained by the chain rule, repeating until the whole lifted
// system is polynomial in (x, z). The lift is exact: along any solution,
// z(t) = h(x(t)).

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "koopman/expr.hpp"

namespace koopman {

struct OdeSystem {
    std::vector<std::string> state_names;
    std::vector<Expr> rhs;  // one per state
    Env parameters;

    std::size_t dimension() const { return state_names.size(); }
    std::set<std::string> state_set() const { return {state_names.begin(), state_names.end()}; }
    // Throws InvalidArgument when sizes disagree or a right-hand side
    // references a symbol that is neither a state nor a parameter.
    void validate() const;
};

// Text format, one statement per line, '#' starts a comment:
//   param NAME = <constant expression>
//   NAME' = <expression>
// States are ordered as their equations appear.
OdeSystem parse_system(std::string_view text);
OdeSystem load_system(const std::string& path);
std::string format_system(const OdeSystem& sys);

struct AuxDefinition {
    std::string name;
    Expr local;        // over base states and earlier auxiliary variables
    Expr over_states;  // the same function written over base states only
};

struct LiftedSystem {
    OdeSystem base;
    std::vector<AuxDefinition> aux;
    std::vector<Expr> lifted_rhs;  // base states first, then aux in order

    std::vector<std::string> variable_names() const;
    // The lifted system as an ordinary ODE over (x, z).
    OdeSystem as_ode_system() const;
    // (x, h(x)): the lifted initial condition for a base state.
    std::vector<double> lift_state(std::span<const double> x) const;
};

// sum_j dh/dx_j * f_j(x), simplified.
Expr lie_derivative(const Expr& h, const OdeSystem& sys);

// Auxiliary variables are introduced innermost first, in depth-first
// discovery order, and deduplicated structurally; sin(u) and cos(u) always
// enter together, sine first. A round computes the ODEs of the auxiliary
// variables introduced by the previous round. Throws NumericalError when
// more than `max_rounds` rounds would be needed.
LiftedSystem lift(const OdeSystem& sys, int max_rounds = 10);

// Canonical polynomial form: exponent vector over `vars` -> coefficient
// (a parameter-valued expression). Throws InvalidArgument if `e` is not
// polynomial in `vars`.
std::vector<std::pair<std::vector<int>, Expr>> expand_polynomial(const Expr& e,
                                                                 std::span<const std::string> vars);

enum class DictionaryKind { Lie, Monomial, Rbf };

struct Observable {
    Expr expr;
    // Thin-plate spline r^2 ln r around this center; evaluated with the
    // r -> 0 limit (zero) instead of the generic expression.
    std::optional<std::vector<double>> rbf_center;
};

class ObservableSet {
public:
    ObservableSet(DictionaryKind kind, std::vector<std::string> state_names, std::vector<Observable> entries,
                  Env parameters = {});

    DictionaryKind kind() const { return kind_; }
    std::size_t n() const { return state_names_.size(); }
    std::size_t q() const { return entries_.size(); }
    const std::vector<std::string>& state_names() const { return state_names_; }
    const std::vector<Observable>& entries() const { return entries_; }
    const Env& parameters() const { return parameters_; }
    // Degree for monomial dictionaries, 0 otherwise.
    int degree() const { return degree_; }
    void set_degree(int d) { degree_ = d; }
    std::vector<std::vector<double>> rbf_centers() const;

    // Diagnostics raised while building the set (e.g. q <= n).
    const std::vector<std::string>& warnings() const { return warnings_; }
    void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

    // Whether entries[0..n) are exactly the state coordinates, in order.
    bool identity_leading() const;

    Eigen::VectorXd evaluate(std::span<const double> x) const;
    // Column k of the result is g(X.col(k)).
    Eigen::MatrixXd evaluate_columns(const Eigen::MatrixXd& X) const;
    // q x n matrix of partial derivatives dg_i/dx_j.
    Eigen::MatrixXd jacobian(std::span<const double> x) const;

    // Ordinal of the entry structurally equal to `e` after simplify.
    std::optional<std::size_t> find(const Expr& e) const;

    // e.g. "lie", "p3", "rbf19"
    std::string label() const;

private:
    DictionaryKind kind_;
    std::vector<std::string> state_names_;
    std::vector<Observable> entries_;
    Env parameters_;
    int degree_ = 0;
    std::vector<std::string> warnings_;
    std::vector<CompiledExpr> compiled_;
    std::vector<std::vector<CompiledExpr>> compiled_grad_;
};

// [x_1..x_n] ++ [h_i(x) for each aux] ++ [each distinct nonlinear monomial
// of the lifted right-hand side, written over x], deduplicated.
ObservableSet observables_from_lift(const LiftedSystem& ls);

// All monomials of degree 1..degree without a constant term. Within a
// degree, mixed monomials come first in descending lexicographic order of
// their exponent vectors, followed by the pure powers x_1^d .. x_n^d.
ObservableSet monomial_dictionary(std::vector<std::string> state_names, int degree);
ObservableSet monomial_dictionary(int n, int degree);

// State coordinates followed by one thin-plate spline per center.
ObservableSet rbf_dictionary(std::vector<std::string> state_names, int total,
                             const std::vector<std::vector<double>>& centers);

// The lift and its dictionary as a line-oriented text document.
std::string format_lift(const LiftedSystem& ls, const ObservableSet& obs);

}  // namespace koopman
