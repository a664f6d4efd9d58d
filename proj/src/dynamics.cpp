#include "koopman/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "koopman/error.hpp"
#include "parallel.hpp"

namespace koopman {

VectorField::VectorField(const OdeSystem& sys) {
    sys.validate();
    rhs_.reserve(sys.dimension());
    for (const Expr& f : sys.rhs) rhs_.emplace_back(f, sys.state_names, sys.parameters);
}

void VectorField::operator()(std::span<const double> x, std::span<double> dx) const {
    for (std::size_t i = 0; i < rhs_.size(); ++i) dx[i] = rhs_[i](x);
}

Eigen::VectorXd VectorField::operator()(const Eigen::VectorXd& x) const {
    Eigen::VectorXd dx(x.size());
    (*this)(std::span<const double>(x.data(), x.size()), std::span<double>(dx.data(), dx.size()));
    return dx;
}

Trajectory integrate_rk4(const VectorField& f, std::span<const double> x0, double dt_out, int steps,
                         int substeps) {
    const std::size_t n = f.dimension();
    if (x0.size() != n) throw InvalidArgument("initial state has dimension " + std::to_string(x0.size()) +
                                              ", expected " + std::to_string(n));
    if (!(dt_out > 0.0)) throw InvalidArgument("dt must be positive");
    if (steps < 0) throw InvalidArgument("steps must be nonnegative");
    if (substeps < 1) throw InvalidArgument("substeps must be at least 1");

    Trajectory traj;
    traj.dt = dt_out;
    traj.states.resize(steps + 1, static_cast<Eigen::Index>(n));
    std::vector<double> x(x0.begin(), x0.end()), k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (std::size_t j = 0; j < n; ++j) traj.states(0, j) = x[j];
    const double h = dt_out / substeps;

    for (int step = 1; step <= steps; ++step) {
        for (int s = 0; s < substeps; ++s) {
            f(x, k1);
            for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
            f(tmp, k2);
            for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
            f(tmp, k3);
            for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + h * k3[j];
            f(tmp, k4);
            for (std::size_t j = 0; j < n; ++j) x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(x[j])) {
                throw NumericalError("integration diverged at step " + std::to_string(step) + " (t = " +
                                     std::to_string(step * dt_out) + ")");
            }
            traj.states(step, j) = x[j];
        }
    }
    return traj;
}

Trajectory integrate_rk4(const OdeSystem& sys, std::span<const double> x0, double dt_out, int steps,
                         int substeps) {
    return integrate_rk4(VectorField(sys), x0, dt_out, steps, substeps);
}

std::vector<Trajectory> integrate_many(const OdeSystem& sys, const std::vector<std::vector<double>>& starts,
                                       double dt_out, int steps, int substeps, unsigned threads) {
    const VectorField f(sys);
    std::vector<Trajectory> out(starts.size());
    detail::parallel_for(starts.size(), threads,
                         [&](std::size_t i) { out[i] = integrate_rk4(f, starts[i], dt_out, steps, substeps); });
    return out;
}

std::vector<std::vector<double>> sample_lattice(const LatticeSpec& spec) {
    std::vector<std::vector<double>> axes;
    for (const Range& r : spec.axes) {
        if (!(r.step > 0.0)) throw InvalidArgument("lattice step must be positive");
        if (r.start > r.stop) throw InvalidArgument("lattice start exceeds stop");
        const auto count = static_cast<long>(std::floor((r.stop - r.start) / r.step + 1e-9)) + 1;
        std::vector<double> v;
        for (long k = 0; k < count; ++k) v.push_back(r.start + static_cast<double>(k) * r.step);
        axes.push_back(std::move(v));
    }
    std::vector<std::vector<double>> points;
    if (axes.empty()) return points;
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
        std::vector<double> p(axes.size());
        for (std::size_t d = 0; d < axes.size(); ++d) p[d] = axes[d][idx[d]];
        points.push_back(std::move(p));
        std::size_t d = axes.size();
        while (d > 0) {
            --d;
            if (++idx[d] < axes[d].size()) break;
            idx[d] = 0;
            if (d == 0) return points;
        }
    }
}

SmibModel smib_build(const SmibParams& p) {
    for (double v : {p.X, p.V1, p.V2, p.P, p.Xd, p.D, p.H, p.f}) {
        if (!(v > 0.0)) throw InvalidArgument("network parameters must be positive");
    }
    if (!(p.R >= 0.0)) throw InvalidArgument("R must be nonnegative");
    using C = std::complex<double>;
    const C Z(p.R, p.X);
    if (std::abs(Z) == 0.0) throw InvalidArgument("singular line admittance");
    const C Y = 1.0 / Z;
    const double G = Y.real(), B = Y.imag();

    auto residual = [&](double t) {
        return p.V1 * p.V1 * G - p.V1 * p.V2 * G * std::cos(t) - p.V1 * p.V2 * B * std::sin(t) - p.P;
    };
    auto slope = [&](double t) { return p.V1 * p.V2 * G * std::sin(t) - p.V1 * p.V2 * B * std::cos(t); };

    double lo = 0.0, hi = std::numbers::pi / 2;
    double flo = residual(lo), fhi = residual(hi);
    if (flo * fhi > 0.0) throw NumericalError("no sign change of the power-flow residual on [0, pi/2]");
    while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        double fm = residual(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    double theta = 0.5 * (lo + hi);
    for (int it = 0; it < 2; ++it) {
        double s = slope(theta);
        if (s != 0.0) theta -= residual(theta) / s;
    }

    SmibDerived d;
    d.theta1 = theta;
    const C V1 = std::polar(p.V1, theta);
    d.I = (V1 - p.V2) * Y;
    d.E = V1 + C(0.0, p.Xd) * d.I;
    d.E_mag = std::abs(d.E);
    d.delta0 = std::arg(d.E);
    const C Zeq(p.R, p.X + p.Xd);
    const C Yeq = 1.0 / Zeq;
    d.G_eq = Yeq.real();
    d.B_eq = Yeq.imag();
    d.V2 = p.V2;
    d.Pm = p.P;
    d.ws = 2.0 * std::numbers::pi * p.f;
    d.M = 2.0 * p.H / d.ws;
    d.D = p.D;
    d.k1 = d.Pm - d.E_mag * d.E_mag * d.G_eq;
    d.c2 = d.E_mag * p.V2 * d.G_eq;
    d.c3 = d.E_mag * p.V2 * d.B_eq;
    // polish delta0 against the swing equation itself so x = 0 is its fixed point
    for (int it = 0; it < 2; ++it) {
        const double r = d.k1 + d.c2 * std::cos(d.delta0) + d.c3 * std::sin(d.delta0);
        const double dr = d.c3 * std::cos(d.delta0) - d.c2 * std::sin(d.delta0);
        if (dr != 0.0) d.delta0 -= r / dr;
    }
    d.k2 = d.c2 * std::cos(d.delta0) + d.c3 * std::sin(d.delta0);
    d.k3 = d.c3 * std::cos(d.delta0) - d.c2 * std::sin(d.delta0);

    SmibModel m;
    m.derived = d;
    m.system.state_names = {"delta", "omega"};
    m.system.parameters = {{"k1", d.k1}, {"k2", d.k2}, {"k3", d.k3}, {"D", d.D}, {"ws", d.ws}, {"M", d.M}};
    m.system.rhs = {parse("omega"), parse("(k1 + k2*cos(delta) + k3*sin(delta) - D/ws*omega)/M")};
    return m;
}

std::pair<double, double> smib_outputs(std::span<const double> x, const SmibDerived& d) {
    const double delta = x[0] + d.delta0;
    const double E = d.E_mag, c = std::cos(delta), s = std::sin(delta);
    const double pe = E * E * d.G_eq - E * d.V2 * d.G_eq * c - E * d.V2 * d.B_eq * s;
    const double qe = -E * E * d.B_eq + E * d.V2 * d.B_eq * c - E * d.V2 * d.G_eq * s;
    return {pe, qe};
}

std::pair<double, double> smib_outputs_dx1(std::span<const double> x, const SmibDerived& d) {
    const double delta = x[0] + d.delta0;
    const double E = d.E_mag, c = std::cos(delta), s = std::sin(delta);
    return {E * d.V2 * d.G_eq * s - E * d.V2 * d.B_eq * c, -E * d.V2 * d.B_eq * s - E * d.V2 * d.G_eq * c};
}

double damping_ratio(std::complex<double> lambda) {
    const double r = std::abs(lambda);
    return r == 0.0 ? 0.0 : -lambda.real() / r;
}

double frequency_hz(std::complex<double> lambda) { return std::abs(lambda.imag()) / (2.0 * std::numbers::pi); }

LinearizationResult jacobian_eigs(const OdeSystem& sys, std::span<const double> x_star) {
    sys.validate();
    const std::size_t n = sys.dimension();
    if (x_star.size() != n) throw InvalidArgument("state dimension mismatch");
    LinearizationResult out;
    out.jacobian.resize(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            CompiledExpr dfi(differentiate(sys.rhs[i], sys.state_names[j]), sys.state_names, sys.parameters);
            out.jacobian(i, j) = dfi(x_star);
        }
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(out.jacobian, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.eigenvalues.push_back(es.eigenvalues()[i]);
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), [](auto a, auto b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    for (auto l : out.eigenvalues) {
        if (l.imag() > 0.0) out.modes.push_back({l, frequency_hz(l), damping_ratio(l)});
    }
    return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t";
    for (Eigen::Index j = 0; j < traj.dimension(); ++j) os << ",x" << (j + 1);
    os << "\n" << std::setprecision(17);
    for (Eigen::Index k = 0; k < traj.samples(); ++k) {
        os << static_cast<double>(k) * traj.dt;
        for (Eigen::Index j = 0; j < traj.dimension(); ++j) os << ',' << traj.states(k, j);
        os << "\n";
    }
}

}  // namespace koopman
