#include "koopman/polylift.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "koopman/error.hpp"

namespace koopman {

// ------------------------------------------------------------- OdeSystem

void OdeSystem::validate() const {
    if (state_names.size() != rhs.size()) {
        throw InvalidArgument("system has " + std::to_string(state_names.size()) + " states but " +
                              std::to_string(rhs.size()) + " right-hand sides");
    }
    if (state_names.empty()) throw InvalidArgument("system has no states");
    auto states = state_set();
    if (states.size() != state_names.size()) throw InvalidArgument("duplicate state name");
    for (std::size_t i = 0; i < rhs.size(); ++i) {
        for (const auto& v : free_variables(rhs[i])) {
            if (!states.count(v) && !parameters.count(v)) {
                throw InvalidArgument("equation for '" + state_names[i] + "' uses unknown symbol '" + v + "'");
            }
        }
    }
}

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool valid_identifier(const std::string& s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

}  // namespace

OdeSystem parse_system(std::string_view text) {
    OdeSystem sys;
    std::size_t line_start = 0;
    int line_no = 0;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        ++line_no;
        std::string_view raw = text.substr(line_start, line_end - line_start);
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::string line = trim(raw);
        const std::size_t base = line_start + (raw.find_first_not_of(" \t") == std::string_view::npos
                                                   ? 0
                                                   : raw.find_first_not_of(" \t"));
        line_start = line_end + 1;
        if (line.empty()) continue;

        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("line " + std::to_string(line_no) + ": expected '='", base);
        std::string lhs = trim(std::string_view(line).substr(0, eq));
        std::string body = line.substr(eq + 1);
        std::size_t body_offset = base + eq + 1;

        auto parse_body = [&]() -> Expr {
            try {
                return parse(body);
            } catch (const ParseError& e) {
                throw ParseError("line " + std::to_string(line_no) + ": " + e.detail(), body_offset + e.offset());
            }
        };

        if (lhs.rfind("param", 0) == 0 && lhs.size() > 5 && std::isspace(static_cast<unsigned char>(lhs[5]))) {
            std::string name = trim(std::string_view(lhs).substr(5));
            if (!valid_identifier(name)) {
                throw ParseError("line " + std::to_string(line_no) + ": bad parameter name '" + name + "'", base);
            }
            sys.parameters[name] = evaluate(parse_body(), sys.parameters);
        } else if (!lhs.empty() && lhs.back() == '\'') {
            std::string name = trim(std::string_view(lhs).substr(0, lhs.size() - 1));
            if (!valid_identifier(name)) {
                throw ParseError("line " + std::to_string(line_no) + ": bad state name '" + name + "'", base);
            }
            sys.state_names.push_back(name);
            sys.rhs.push_back(parse_body());
        } else {
            throw ParseError("line " + std::to_string(line_no) + ": expected \"param NAME = ...\" or \"NAME' = ...\"",
                             base);
        }
    }
    sys.validate();
    return sys;
}

OdeSystem load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open system file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_system(ss.str());
}

namespace {

std::string format_real(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string format_system(const OdeSystem& sys) {
    std::string out;
    for (const auto& [k, v] : sys.parameters) out += "param " + k + " = " + format_real(v) + "\n";
    for (std::size_t i = 0; i < sys.dimension(); ++i) {
        out += sys.state_names[i] + "' = " + to_string(sys.rhs[i]) + "\n";
    }
    return out;
}

// ----------------------------------------------------------------- lifting

Expr lie_derivative(const Expr& h, const OdeSystem& sys) {
    for (const auto& v : free_variables(h)) {
        if (std::find(sys.state_names.begin(), sys.state_names.end(), v) == sys.state_names.end() &&
            !sys.parameters.count(v)) {
            throw InvalidArgument("unknown variable '" + v + "' in observable");
        }
    }
    std::vector<Expr> terms;
    for (std::size_t j = 0; j < sys.dimension(); ++j) {
        Expr dh = differentiate(h, sys.state_names[j]);
        if (dh.is_constant(0.0)) continue;
        terms.push_back(Expr::product({dh, sys.rhs[j]}));
    }
    if (terms.empty()) return Expr::constant(0.0);
    return simplify(Expr::sum(std::move(terms)));
}

std::vector<std::string> LiftedSystem::variable_names() const {
    std::vector<std::string> names = base.state_names;
    for (const auto& a : aux) names.push_back(a.name);
    return names;
}

OdeSystem LiftedSystem::as_ode_system() const {
    return OdeSystem{variable_names(), lifted_rhs, base.parameters};
}

std::vector<double> LiftedSystem::lift_state(std::span<const double> x) const {
    if (x.size() != base.dimension()) throw InvalidArgument("state dimension mismatch");
    std::vector<double> z(x.begin(), x.end());
    for (const auto& a : aux) {
        CompiledExpr h(a.over_states, base.state_names, base.parameters);
        z.push_back(h(x));
    }
    return z;
}

namespace {

class Lifter {
public:
    Lifter(const OdeSystem& sys, int max_rounds) : sys_(sys), max_rounds_(max_rounds) {
        for (const auto& s : sys.state_names) {
            taken_.insert(s);
            vars_.insert(s);
        }
        for (const auto& [k, v] : sys.parameters) taken_.insert(k);
    }

    LiftedSystem run() {
        LiftedSystem out;
        out.base = sys_;
        state_rhs_.reserve(sys_.dimension());
        for (const Expr& f : sys_.rhs) state_rhs_.push_back(polyize(simplify(f), 0));

        // aux ODEs in creation order; each may create further aux variables
        for (std::size_t i = 0; i < aux_.size(); ++i) {
            int round = generation_[i] + 1;
            if (round > max_rounds_) {
                throw NumericalError("lifted system is not polynomial after " + std::to_string(max_rounds_) +
                                     " rounds (pending: " + aux_[i].name + " = " + to_string(aux_[i].over_states) +
                                     ")");
            }
            aux_rhs_.push_back(aux_derivative(i, round));
        }

        out.aux = aux_;
        out.lifted_rhs = state_rhs_;
        out.lifted_rhs.insert(out.lifted_rhs.end(), aux_rhs_.begin(), aux_rhs_.end());
        for (std::size_t i = 0; i < out.lifted_rhs.size(); ++i) {
            if (!is_polynomial(out.lifted_rhs[i], vars_)) {
                throw InvalidArgument("unsupported term left after lifting: " + to_string(out.lifted_rhs[i]));
            }
        }
        return out;
    }

private:
    // Replace every transcendental subterm that depends on a lifted
    // variable by its auxiliary symbol. `e` is simplified.
    Expr polyize(const Expr& e, int generation) {
        if (!depends_on(e, vars_)) return e;
        switch (e.kind()) {
            case NodeKind::Constant:
            case NodeKind::Variable:
                return e;
            case NodeKind::Sum:
            case NodeKind::Product: {
                std::vector<Expr> a;
                for (const Expr& x : e.args()) a.push_back(polyize(x, generation));
                return simplify(e.kind() == NodeKind::Sum ? Expr::sum(std::move(a)) : Expr::product(std::move(a)));
            }
            case NodeKind::Power: {
                Expr base = polyize(e.arg(), generation);
                if (e.exponent() >= 0) return simplify(Expr::power(base, e.exponent()));
                Expr inv = Expr::variable(intern(NodeKind::Reciprocal, base, generation));
                return simplify(Expr::power(inv, -e.exponent()));
            }
            default: {
                Expr arg = polyize(e.arg(), generation);
                return Expr::variable(intern(e.kind(), arg, generation));
            }
        }
    }

    std::string intern(NodeKind kind, const Expr& arg, int generation) {
        if (kind == NodeKind::Sin || kind == NodeKind::Cos) {
            std::string s = intern_one(NodeKind::Sin, arg, generation);
            std::string c = intern_one(NodeKind::Cos, arg, generation);
            return kind == NodeKind::Sin ? s : c;
        }
        return intern_one(kind, arg, generation);
    }

    static Expr unary(NodeKind kind, const Expr& arg) {
        switch (kind) {
            case NodeKind::Sin:
                return Expr::sin(arg);
            case NodeKind::Cos:
                return Expr::cos(arg);
            case NodeKind::Exp:
                return Expr::exp(arg);
            case NodeKind::Ln:
                return Expr::ln(arg);
            default:
                return Expr::reciprocal(arg);
        }
    }

    std::string intern_one(NodeKind kind, const Expr& arg, int generation) {
        Expr key = unary(kind, arg);
        for (std::size_t i = 0; i < aux_.size(); ++i) {
            if (aux_[i].local == key) return aux_[i].name;
        }
        std::string name = fresh_name();
        Expr over = simplify(substitute(key, back_));
        aux_.push_back({name, key, over});
        generation_.push_back(generation);
        back_.emplace(name, over);
        taken_.insert(name);
        vars_.insert(name);
        return name;
    }

    std::string fresh_name() {
        for (int k = static_cast<int>(aux_.size()) + 1;; ++k) {
            std::string n = "z" + std::to_string(k);
            if (!taken_.count(n)) return n;
        }
    }

    const Expr& rate_of(const std::string& v) const {
        for (std::size_t j = 0; j < sys_.dimension(); ++j) {
            if (sys_.state_names[j] == v) return state_rhs_[j];
        }
        for (std::size_t j = 0; j < aux_.size(); ++j) {
            if (aux_[j].name == v) return aux_rhs_.at(j);
        }
        throw InvalidArgument("no rate for '" + v + "'");
    }

    // d/dt z_i = sum_v dH/dv * dv/dt over the lifted variables v of H.
    Expr aux_derivative(std::size_t i, int round) {
        const Expr& local = aux_[i].local;
        std::vector<Expr> terms;
        for (const auto& v : free_variables(local)) {
            if (!vars_.count(v)) continue;
            Expr partial = polyize(differentiate(local, v), round);
            if (partial.is_constant(0.0)) continue;
            terms.push_back(Expr::product({partial, rate_of(v)}));
        }
        if (terms.empty()) return Expr::constant(0.0);
        return simplify(Expr::sum(std::move(terms)));
    }

    const OdeSystem& sys_;
    int max_rounds_;
    std::set<std::string> taken_;
    std::set<std::string> vars_;
    std::vector<Expr> state_rhs_;
    std::vector<AuxDefinition> aux_;
    std::vector<int> generation_;
    std::vector<Expr> aux_rhs_;
    std::map<std::string, Expr, std::less<>> back_;
};

}  // namespace

LiftedSystem lift(const OdeSystem& sys, int max_rounds) {
    sys.validate();
    if (max_rounds < 0) throw InvalidArgument("max_rounds must be nonnegative");
    return Lifter(sys, max_rounds).run();
}

// -------------------------------------------------------------- expansion

namespace {

using Poly = std::map<std::vector<int>, Expr>;

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly out;
    for (const auto& [ea, ca] : a) {
        for (const auto& [eb, cb] : b) {
            std::vector<int> e(ea.size());
            for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
            Expr c = simplify(Expr::product({ca, cb}));
            auto it = out.find(e);
            if (it == out.end()) {
                out.emplace(std::move(e), c);
            } else {
                it->second = simplify(Expr::sum({it->second, c}));
            }
        }
    }
    return out;
}

Poly expand_rec(const Expr& e, std::span<const std::string> vars, const std::set<std::string>& var_set) {
    const std::vector<int> zero(vars.size(), 0);
    if (!depends_on(e, var_set)) return Poly{{zero, e}};
    switch (e.kind()) {
        case NodeKind::Variable: {
            auto idx = std::find(vars.begin(), vars.end(), e.name()) - vars.begin();
            std::vector<int> ex = zero;
            ex[idx] = 1;
            return Poly{{ex, Expr::constant(1.0)}};
        }
        case NodeKind::Sum: {
            Poly out;
            for (const Expr& t : e.args()) {
                for (auto& [ex, c] : expand_rec(t, vars, var_set)) {
                    auto it = out.find(ex);
                    if (it == out.end()) {
                        out.emplace(ex, c);
                    } else {
                        it->second = simplify(Expr::sum({it->second, c}));
                    }
                }
            }
            return out;
        }
        case NodeKind::Product: {
            Poly out{{zero, Expr::constant(1.0)}};
            for (const Expr& f : e.args()) out = poly_mul(out, expand_rec(f, vars, var_set));
            return out;
        }
        case NodeKind::Power: {
            if (e.exponent() < 0) break;
            Poly base = expand_rec(e.arg(), vars, var_set);
            Poly out{{zero, Expr::constant(1.0)}};
            for (int k = 0; k < e.exponent(); ++k) out = poly_mul(out, base);
            return out;
        }
        default:
            break;
    }
    throw InvalidArgument("not a polynomial: " + to_string(e));
}

int total_degree(const std::vector<int>& e) {
    int d = 0;
    for (int k : e) d += k;
    return d;
}

Expr monomial_expr(std::span<const std::string> vars, const std::vector<int>& ex) {
    std::vector<Expr> f;
    for (std::size_t i = 0; i < ex.size(); ++i) {
        if (ex[i] > 0) f.push_back(Expr::power(Expr::variable(vars[i]), ex[i]));
    }
    if (f.empty()) return Expr::constant(1.0);
    return simplify(Expr::product(std::move(f)));
}

}  // namespace

std::vector<std::pair<std::vector<int>, Expr>> expand_polynomial(const Expr& e,
                                                                 std::span<const std::string> vars) {
    std::set<std::string> var_set(vars.begin(), vars.end());
    Poly p = expand_rec(simplify(e), vars, var_set);
    std::vector<std::pair<std::vector<int>, Expr>> out;
    for (auto& [ex, c] : p) {
        if (!c.is_constant(0.0)) out.emplace_back(ex, c);
    }
    return out;
}

// ----------------------------------------------------------- dictionaries

ObservableSet::ObservableSet(DictionaryKind kind, std::vector<std::string> state_names,
                             std::vector<Observable> entries, Env parameters)
    : kind_(kind), state_names_(std::move(state_names)), entries_(std::move(entries)),
      parameters_(std::move(parameters)) {
    for (const auto& o : entries_) {
        if (o.rbf_center) {
            if (o.rbf_center->size() != n()) throw InvalidArgument("rbf center dimension mismatch");
            compiled_.emplace_back();
            compiled_grad_.emplace_back();
            continue;
        }
        compiled_.emplace_back(o.expr, state_names_, parameters_);
        std::vector<CompiledExpr> grad;
        for (const auto& s : state_names_) grad.emplace_back(differentiate(o.expr, s), state_names_, parameters_);
        compiled_grad_.push_back(std::move(grad));
    }
}

std::vector<std::vector<double>> ObservableSet::rbf_centers() const {
    std::vector<std::vector<double>> c;
    for (const auto& o : entries_) {
        if (o.rbf_center) c.push_back(*o.rbf_center);
    }
    return c;
}

bool ObservableSet::identity_leading() const {
    if (q() < n()) return false;
    for (std::size_t i = 0; i < n(); ++i) {
        if (entries_[i].rbf_center || !(entries_[i].expr == Expr::variable(state_names_[i]))) return false;
    }
    return true;
}

namespace {

double thin_plate(std::span<const double> x, const std::vector<double>& c) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) r2 += (x[j] - c[j]) * (x[j] - c[j]);
    if (r2 == 0.0) return 0.0;
    return 0.5 * r2 * std::log(r2);
}

}  // namespace

Eigen::VectorXd ObservableSet::evaluate(std::span<const double> x) const {
    if (x.size() != n()) throw InvalidArgument("state dimension mismatch");
    Eigen::VectorXd g(q());
    for (std::size_t i = 0; i < q(); ++i) {
        g[i] = entries_[i].rbf_center ? thin_plate(x, *entries_[i].rbf_center) : compiled_[i](x);
    }
    return g;
}

Eigen::MatrixXd ObservableSet::evaluate_columns(const Eigen::MatrixXd& X) const {
    if (static_cast<std::size_t>(X.rows()) != n()) throw InvalidArgument("state dimension mismatch");
    Eigen::MatrixXd G(q(), X.cols());
    std::vector<double> x(n());
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
        for (std::size_t j = 0; j < n(); ++j) x[j] = X(j, k);
        for (std::size_t i = 0; i < q(); ++i) {
            try {
                G(i, k) = entries_[i].rbf_center ? thin_plate(x, *entries_[i].rbf_center) : compiled_[i](x);
            } catch (const EvalError& e) {
                throw EvalError("observable " + std::to_string(i) + " at snapshot " + std::to_string(k) + ": " +
                                e.what());
            }
        }
    }
    return G;
}

Eigen::MatrixXd ObservableSet::jacobian(std::span<const double> x) const {
    if (x.size() != n()) throw InvalidArgument("state dimension mismatch");
    Eigen::MatrixXd J(q(), n());
    for (std::size_t i = 0; i < q(); ++i) {
        if (const auto& c = entries_[i].rbf_center) {
            double r2 = 0.0;
            for (std::size_t j = 0; j < n(); ++j) r2 += (x[j] - (*c)[j]) * (x[j] - (*c)[j]);
            // d/dx (r^2 ln r) = (x - c)(2 ln r + 1), zero at the center
            double s = r2 == 0.0 ? 0.0 : std::log(r2) + 1.0;
            for (std::size_t j = 0; j < n(); ++j) J(i, j) = (x[j] - (*c)[j]) * s;
        } else {
            for (std::size_t j = 0; j < n(); ++j) J(i, j) = compiled_grad_[i][j](x);
        }
    }
    return J;
}

std::optional<std::size_t> ObservableSet::find(const Expr& e) const {
    Expr s = simplify(e);
    for (std::size_t i = 0; i < q(); ++i) {
        if (!entries_[i].rbf_center && simplify(entries_[i].expr) == s) return i;
    }
    return std::nullopt;
}

std::string ObservableSet::label() const {
    switch (kind_) {
        case DictionaryKind::Lie:
            return "lie";
        case DictionaryKind::Monomial:
            return "p" + std::to_string(degree_);
        case DictionaryKind::Rbf:
            return "rbf" + std::to_string(q());
    }
    return "?";
}

ObservableSet observables_from_lift(const LiftedSystem& ls) {
    const auto& states = ls.base.state_names;
    std::vector<Observable> entries;
    std::vector<Expr> seen;
    auto add = [&](const Expr& e) {
        Expr s = simplify(e);
        if (std::find(seen.begin(), seen.end(), s) != seen.end()) return;
        seen.push_back(s);
        entries.push_back({s, std::nullopt});
    };
    for (const auto& s : states) add(Expr::variable(s));
    for (const auto& a : ls.aux) add(a.over_states);

    std::vector<std::string> vars = ls.variable_names();
    std::vector<std::vector<int>> monomials;
    for (const Expr& f : ls.lifted_rhs) {
        for (const auto& [ex, coeff] : expand_polynomial(f, vars)) {
            if (total_degree(ex) < 2) continue;
            if (std::find(monomials.begin(), monomials.end(), ex) == monomials.end()) monomials.push_back(ex);
        }
    }
    std::sort(monomials.begin(), monomials.end(), [](const auto& a, const auto& b) {
        int da = total_degree(a), db = total_degree(b);
        if (da != db) return da < db;
        return a > b;
    });
    std::map<std::string, Expr, std::less<>> back;
    for (const auto& a : ls.aux) back.emplace(a.name, a.over_states);
    for (const auto& ex : monomials) add(substitute(monomial_expr(vars, ex), back));

    ObservableSet obs(DictionaryKind::Lie, states, std::move(entries), ls.base.parameters);
    if (obs.q() <= obs.n()) {
        obs.add_warning("lift produced only the " + std::to_string(obs.n()) +
                        " state observables; a dictionary needs q > n");
    }
    return obs;
}

ObservableSet monomial_dictionary(std::vector<std::string> state_names, int degree) {
    if (degree < 1) throw InvalidArgument("monomial degree must be at least 1");
    const std::size_t n = state_names.size();
    if (n == 0) throw InvalidArgument("monomial dictionary needs at least one state");
    std::vector<Observable> entries;
    for (int d = 1; d <= degree; ++d) {
        // enumerate exponent vectors of total degree d, lexicographically descending
        std::vector<std::vector<int>> all;
        std::vector<int> ex(n, 0);
        auto rec = [&](auto&& self, std::size_t i, int left) -> void {
            if (i + 1 == n) {
                ex[i] = left;
                all.push_back(ex);
                return;
            }
            for (int k = left; k >= 0; --k) {
                ex[i] = k;
                self(self, i + 1, left - k);
            }
        };
        rec(rec, 0, d);
        std::vector<std::vector<int>> mixed, pure;
        for (auto& e : all) {
            int support = static_cast<int>(std::count_if(e.begin(), e.end(), [](int k) { return k > 0; }));
            (support == 1 ? pure : mixed).push_back(e);
        }
        for (const auto& e : mixed) entries.push_back({monomial_expr(state_names, e), std::nullopt});
        for (const auto& e : pure) entries.push_back({monomial_expr(state_names, e), std::nullopt});
    }
    ObservableSet obs(DictionaryKind::Monomial, std::move(state_names), std::move(entries));
    obs.set_degree(degree);
    return obs;
}

ObservableSet monomial_dictionary(int n, int degree) {
    if (n < 1) throw InvalidArgument("monomial dictionary needs at least one state");
    std::vector<std::string> names;
    for (int i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
    return monomial_dictionary(std::move(names), degree);
}

ObservableSet rbf_dictionary(std::vector<std::string> state_names, int total,
                             const std::vector<std::vector<double>>& centers) {
    const int n = static_cast<int>(state_names.size());
    if (total <= n) throw InvalidArgument("rbf dictionary size must exceed the state dimension");
    if (static_cast<int>(centers.size()) != total - n) {
        throw InvalidArgument("rbf dictionary of size " + std::to_string(total) + " needs " +
                              std::to_string(total - n) + " centers, got " + std::to_string(centers.size()));
    }
    for (std::size_t a = 0; a < centers.size(); ++a) {
        if (static_cast<int>(centers[a].size()) != n) throw InvalidArgument("rbf center dimension mismatch");
        for (std::size_t b = 0; b < a; ++b) {
            if (centers[a] == centers[b]) throw InvalidArgument("duplicate rbf center");
        }
    }
    std::vector<Observable> entries;
    for (const auto& s : state_names) entries.push_back({Expr::variable(s), std::nullopt});
    for (const auto& c : centers) {
        std::vector<Expr> sq;
        for (int j = 0; j < n; ++j) {
            sq.push_back(Expr::power(Expr::sum({Expr::variable(state_names[j]), Expr::constant(-c[j])}), 2));
        }
        Expr r2 = Expr::sum(std::move(sq));
        entries.push_back({Expr::product({Expr::constant(0.5), r2, Expr::ln(r2)}), c});
    }
    return ObservableSet(DictionaryKind::Rbf, std::move(state_names), std::move(entries));
}

std::string format_lift(const LiftedSystem& ls, const ObservableSet& obs) {
    std::string out;
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
        return s;
    };
    std::vector<std::string> aux_names;
    for (const auto& a : ls.aux) aux_names.push_back(a.name);
    out += "states: " + join(ls.base.state_names) + "\n";
    out += "aux: " + join(aux_names) + "\n";
    for (const auto& [k, v] : ls.base.parameters) out += "param " + k + " = " + format_real(v) + "\n";
    out += "[definitions]\n";
    for (const auto& a : ls.aux) {
        out += a.name + " = " + to_string(a.local);
        if (!(a.local == a.over_states)) out += "    # " + to_string(a.over_states);
        out += "\n";
    }
    out += "[equations]\n";
    auto names = ls.variable_names();
    for (std::size_t i = 0; i < names.size(); ++i) out += names[i] + "' = " + to_string(ls.lifted_rhs[i]) + "\n";
    out += "[observables]\n";
    for (std::size_t i = 0; i < obs.q(); ++i) {
        out += "g" + std::to_string(i + 1) + " = " + to_string(obs.entries()[i].expr) + "\n";
    }
    for (const auto& w : obs.warnings()) out += "# warning: " + w + "\n";
    return out;
}

}  // namespace koopman
