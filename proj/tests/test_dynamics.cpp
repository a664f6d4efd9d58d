#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "koopman/dynamics.hpp"
#include "koopman/error.hpp"

using namespace koopman;

TEST_CASE("rk4 on trivial systems") {
    double x0[1] = {3.0};
    Trajectory c = integrate_rk4(parse_system("x' = 0"), x0, 0.1, 10);
    CHECK(c.samples() == 11);
    CHECK((c.states.array() == 3.0).all());

    double one[1] = {1.0};
    Trajectory d = integrate_rk4(parse_system("x' = -x"), one, 0.005, 200, 5);
    CHECK(std::abs(d.states(200, 0) - std::exp(-1.0)) <= 1e-8);

    CHECK_THROWS_AS(integrate_rk4(parse_system("x' = -x"), one, 0.0, 10), InvalidArgument);
    CHECK_THROWS_AS(integrate_rk4(parse_system("x' = -x"), one, 0.1, 10, 0), InvalidArgument);
}

TEST_CASE("rk4 reports divergence with the step index") {
    double x0[1] = {1.0};
    try {
        integrate_rk4(parse_system("x' = x^2"), x0, 0.1, 100, 1);
        FAIL("expected divergence");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("machine model from network data") {
    SmibModel m = smib_build();
    const SmibDerived& d = m.derived;
    CHECK(std::abs(d.theta1 - 0.2243) <= 5e-4);
    CHECK(std::abs(d.E_mag - 1.0854) <= 5e-4);
    CHECK(std::abs(d.delta0 - 0.3651) <= 5e-4);
    CHECK(std::abs(d.k1 - 0.5667) <= 5e-4);
    CHECK(std::abs(d.k2 + 0.5667) <= 5e-4);
    CHECK(std::abs(d.k3 + 2.0843) <= 5e-4);

    double origin[2] = {0.0, 0.0};
    VectorField f(m.system);
    double dx[2];
    f(origin, dx);
    CHECK(std::hypot(dx[0], dx[1]) <= 1e-10);

    Trajectory t = integrate_rk4(m.system, origin, 0.005, 160);
    CHECK(t.states.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("electrical power outputs agree with complex arithmetic") {
    SmibModel m = smib_build();
    const SmibDerived& d = m.derived;
    double origin[2] = {0.0, 0.0};
    auto [pe, qe] = smib_outputs(origin, d);
    CHECK(std::abs(pe - 0.80) <= 1e-3);
    CHECK(std::abs(pe - d.Pm) <= 1e-10);

    std::mt19937 rng(11u);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const std::complex<double> Yeq = 1.0 / std::complex<double>(0.05, 0.50);
    for (int trial = 0; trial < 50; ++trial) {
        double x[2] = {u(rng), u(rng)};
        auto [p, q] = smib_outputs(x, d);
        std::complex<double> E = std::polar(d.E_mag, x[0] + d.delta0);
        std::complex<double> S = E * std::conj((E - d.V2) * Yeq);
        CHECK(std::abs(p - S.real()) <= 1e-10);
        CHECK(std::abs(q - S.imag()) <= 1e-10);

        auto [dp, dq] = smib_outputs_dx1(x, d);
        const double h = 1e-6;
        double a[2] = {x[0] + h, x[1]}, b[2] = {x[0] - h, x[1]};
        CHECK(dp == doctest::Approx((smib_outputs(a, d).first - smib_outputs(b, d).first) / (2 * h)).epsilon(1e-6));
        CHECK(dq == doctest::Approx((smib_outputs(a, d).second - smib_outputs(b, d).second) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("linearization at the equilibrium") {
    SmibModel m = smib_build();
    double origin[2] = {0.0, 0.0};
    LinearizationResult lin = jacobian_eigs(m.system, origin);
    REQUIRE(lin.modes.size() == 1);
    CHECK(std::abs(lin.modes[0].lambda.real() + 0.5) <= 5e-5);
    CHECK(std::abs(lin.modes[0].lambda.imag() - 8.8503) <= 5e-5);
    CHECK(std::abs(lin.modes[0].freq_hz - 1.4086) <= 5e-5);
    CHECK(std::abs(lin.modes[0].damping * 100 - 5.6406) <= 5e-4);
    CHECK(damping_ratio({-0.5, 8.8503}) == doctest::Approx(0.5 / std::sqrt(0.25 + 8.8503 * 8.8503)));

    double x0[2] = {0.0, 0.0};
    LinearizationResult real = jacobian_eigs(parse_system("x' = -x + y\ny' = -2*y"), x0);
    CHECK(real.modes.empty());
    CHECK(real.eigenvalues[0].real() == doctest::Approx(-1.0));
}

TEST_CASE("lattice sampling") {
    LatticeSpec spec{{{-0.5, 0.25, 0.5}, {-1.0, 0.25, 1.0}}};
    auto pts = sample_lattice(spec);
    CHECK(pts.size() == 45);
    CHECK(pts[0] == std::vector<double>{-0.5, -1.0});
    CHECK(pts[1] == std::vector<double>{-0.5, -0.75});
    CHECK(pts[9][0] == -0.25);
    CHECK(pts[44] == std::vector<double>{0.5, 1.0});
    CHECK(sample_lattice(LatticeSpec{{{1.0, 1.0, 1.0}}}).size() == 1);
    auto row = sample_lattice(LatticeSpec{{{-0.5, 0.25, 0.5}}});
    REQUIRE(row.size() == 5);
    CHECK(row[2][0] == 0.0);
    CHECK_THROWS_AS(sample_lattice(LatticeSpec{{{0.0, 0.0, 1.0}}}), InvalidArgument);
    CHECK_THROWS_AS(sample_lattice(LatticeSpec{{{1.0, 0.5, 0.0}}}), InvalidArgument);
}

TEST_CASE("lattice trajectories stay bounded and are assembled in order") {
    SmibModel m = smib_build();
    auto starts = sample_lattice(LatticeSpec{{{-0.5, 0.25, 0.5}, {-1.0, 0.25, 1.0}}});
    auto trajs = integrate_many(m.system, starts, 0.005, 160, 5, 3);
    REQUIRE(trajs.size() == 45);
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        CHECK(trajs[i].samples() == 161);
        CHECK(trajs[i].states(0, 0) == starts[i][0]);
        CHECK(trajs[i].states(0, 1) == starts[i][1]);
        CHECK(trajs[i].states.allFinite());
        CHECK(trajs[i].states.cwiseAbs().maxCoeff() < 5.0);
    }
    auto serial = integrate_many(m.system, starts, 0.005, 160, 5, 1);
    for (std::size_t i = 0; i < trajs.size(); ++i) CHECK(serial[i].states == trajs[i].states);
}

TEST_CASE("rk4 is fourth order") {
    SmibModel m = smib_build();
    double x0[2] = {0.5, 1.0};
    const double dt = 0.05;
    const int steps = 20;
    Trajectory ref = integrate_rk4(m.system, x0, dt, steps, 64);
    double e1 = (integrate_rk4(m.system, x0, dt, steps, 2).states.row(steps) - ref.states.row(steps)).norm();
    double e2 = (integrate_rk4(m.system, x0, dt, steps, 4).states.row(steps) - ref.states.row(steps)).norm();
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("lifted dynamics reproduce the aux functions") {
    std::vector<OdeSystem> systems{smib_build().system, parse_system("x' = 1/(1 + exp(x))"),
                                   parse_system("x' = sin(exp(x)) - x\ny' = x/(3 + cos(y)) - y\n")};
    std::mt19937 rng(5u);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const OdeSystem& sys : systems) {
        LiftedSystem ls = lift(sys);
        OdeSystem big = ls.as_ode_system();
        for (int trial = 0; trial < 3; ++trial) {
            std::vector<double> x0(sys.dimension());
            for (double& v : x0) v = u(rng);
            Trajectory base = integrate_rk4(sys, x0, 0.005, 200);
            Trajectory lifted = integrate_rk4(big, ls.lift_state(x0), 0.005, 200);
            double worst = 0.0;
            for (Eigen::Index k = 0; k < base.samples(); ++k) {
                Eigen::VectorXd row = base.states.row(k).transpose();
                std::vector<double> expect = ls.lift_state(std::span<const double>(row.data(), row.size()));
                for (std::size_t j = 0; j < expect.size(); ++j) {
                    worst = std::max(worst, std::abs(lifted.states(k, j) - expect[j]));
                }
            }
            CHECK(worst <= 1e-6);
        }
    }
}

TEST_CASE("trajectory csv") {
    Trajectory t;
    t.dt = 0.5;
    t.states.resize(2, 2);
    t.states << 1.0, 0.1, 2.0, 1.0 / 3.0;
    std::ostringstream os;
    write_trajectory_csv(os, t);
    CHECK(os.str() == "t,x1,x2\n0,1,0.10000000000000001\n0.5,2,0.33333333333333331\n");
}
