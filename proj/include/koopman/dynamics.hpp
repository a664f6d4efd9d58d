#pragma once

// Fixed-step integration, lattice sampling, and the single-machine
// infinite-bus model built from network data.

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "koopman/polylift.hpp"

namespace koopman {

// f(x) for an OdeSystem, compiled once.
class VectorField {
public:
    explicit VectorField(const OdeSystem& sys);
    std::size_t dimension() const { return rhs_.size(); }
    void operator()(std::span<const double> x, std::span<double> dx) const;
    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;

private:
    std::vector<CompiledExpr> rhs_;
};

struct Trajectory {
    double dt = 0.0;
    Eigen::MatrixXd states;  // row k is the state at t = k*dt

    Eigen::Index samples() const { return states.rows(); }
    Eigen::Index dimension() const { return states.cols(); }
};

// Classical RK4 with internal step dt_out/substeps; `steps` output
// intervals, so the result holds steps + 1 states. Throws NumericalError
// naming the output step at which a state stopped being finite.
Trajectory integrate_rk4(const VectorField& f, std::span<const double> x0, double dt_out, int steps,
                         int substeps = 5);
Trajectory integrate_rk4(const OdeSystem& sys, std::span<const double> x0, double dt_out, int steps,
                         int substeps = 5);

// One trajectory per start, returned in the order of `starts` whatever the
// thread count (0 picks the hardware concurrency).
std::vector<Trajectory> integrate_many(const OdeSystem& sys, const std::vector<std::vector<double>>& starts,
                                       double dt_out, int steps, int substeps = 5, unsigned threads = 0);

struct Range {
    double start = 0.0;
    double step = 1.0;
    double stop = 0.0;
};

struct LatticeSpec {
    std::vector<Range> axes;
};

// Cartesian product of the inclusive ranges, first axis slowest.
std::vector<std::vector<double>> sample_lattice(const LatticeSpec& spec);

// Network data in per unit; H in MJ/MVA, f in Hz.
struct SmibParams {
    double R = 0.05;
    double X = 0.30;
    double V1 = 1.05;
    double V2 = 1.00;
    double P = 0.80;
    double Xd = 0.20;
    double D = 10.0;
    double H = 5.0;
    double f = 60.0;
};

struct SmibDerived {
    double theta1 = 0.0;  // terminal voltage angle
    std::complex<double> I;
    std::complex<double> E;
    double E_mag = 0.0;
    double delta0 = 0.0;
    double ws = 0.0;
    double M = 0.0;
    double D = 0.0;
    double Pm = 0.0;
    double G_eq = 0.0;
    double B_eq = 0.0;
    double V2 = 0.0;
    double k1 = 0.0, k2 = 0.0, k3 = 0.0;
    double c2 = 0.0, c3 = 0.0;
};

struct SmibModel {
    OdeSystem system;  // states delta, omega, shifted to put the equilibrium at 0
    SmibDerived derived;
};

SmibModel smib_build(const SmibParams& p = {});

// Electrical real and reactive power at shifted state x.
std::pair<double, double> smib_outputs(std::span<const double> x, const SmibDerived& d);
// d(P_e, Q_e)/d x1; neither depends on x2.
std::pair<double, double> smib_outputs_dx1(std::span<const double> x, const SmibDerived& d);

struct ModeInfo {
    std::complex<double> lambda;  // Im > 0 member of the pair
    double freq_hz = 0.0;
    double damping = 0.0;         // -Re/|lambda|, a ratio
};

struct LinearizationResult {
    Eigen::MatrixXd jacobian;
    std::vector<std::complex<double>> eigenvalues;
    std::vector<ModeInfo> modes;  // complex pairs only
};

double damping_ratio(std::complex<double> lambda);
double frequency_hz(std::complex<double> lambda);

LinearizationResult jacobian_eigs(const OdeSystem& sys, std::span<const double> x_star);

// Header "t,x1,...,xn", 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace koopman
