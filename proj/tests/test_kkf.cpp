#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include "koopman/bench.hpp"
#include "koopman/error.hpp"
#include "koopman/kkf.hpp"

using namespace koopman;

namespace {

struct Fixture {
    ExperimentConfig cfg;
    TrainingData data = build_training_data(cfg);
    std::vector<TrainedDictionary> models;

    Fixture() {
        cfg.dictionaries = {"lie", "p3"};
        models = train_dictionaries(cfg, data, {-0.5, 8.85});
    }
    const KoopmanDecomposition& lie() const { return models[0].decomposition; }
    const KoopmanDecomposition& p3() const { return models[1].decomposition; }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

// Complex power E * conj(I) delivered at the internal EMF.
std::complex<double> complex_power(double x1, const SmibDerived& d) {
    const std::complex<double> Yeq(d.G_eq, d.B_eq);
    const std::complex<double> E = std::polar(d.E_mag, x1 + d.delta0);
    return E * std::conj((E - d.V2) * Yeq);
}

std::string csv(const KkfRun& run) {
    std::ostringstream os;
    write_kkf_csv(os, run);
    return os.str();
}

}  // namespace

TEST_CASE("affine measurement model on the Lie dictionary") {
    const Fixture& f = fixture();
    const SmibDerived& d = f.data.model.derived;
    MeasurementModel m = build_measurement(f.lie(), d);
    REQUIRE(m.mode == MeasurementMode::Affine);
    REQUIRE(m.H.rows() == 2);
    REQUIRE(m.H.cols() == 6);
    for (Eigen::Index j = 0; j < 6; ++j) {
        const bool trig = j == 2 || j == 3;
        CHECK((m.H.col(j).norm() != 0.0) == trig);
    }

    std::mt19937 rng(5u);
    std::uniform_real_distribution<double> ud(-M_PI, M_PI), uw(-20.0, 20.0);
    for (int trial = 0; trial < 100; ++trial) {
        double x[2] = {ud(rng), uw(rng)};
        Eigen::Vector2d y = m.predict(f.lie().dictionary.evaluate(x));
        auto [p, q] = smib_outputs(x, d);
        CHECK(std::abs(y[0] - p) <= 1e-12);
        CHECK(std::abs(y[1] - q) <= 1e-12);
    }

    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        for (int j = 0; j < 50; ++j) {
            double x[2] = {-M_PI + 2 * M_PI * i / 49.0, -20.0 + 40.0 * j / 49.0};
            Eigen::Vector2d y = m.predict(f.lie().dictionary.evaluate(x));
            std::complex<double> S = complex_power(x[0], d);
            worst = std::max({worst, std::abs(y[0] - S.real()), std::abs(y[1] - S.imag())});
        }
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("polynomial dictionaries fall back to the linearized measurement") {
    const Fixture& f = fixture();
    const SmibDerived& d = f.data.model.derived;
    MeasurementModel m = build_measurement(f.p3(), d);
    CHECK(m.mode == MeasurementMode::Linearized);
    double x[2] = {0.4, -1.2};
    Eigen::VectorXd s = f.p3().dictionary.evaluate(x);
    auto [p, q] = smib_outputs(x, d);
    CHECK(m.predict(s)[0] == doctest::Approx(p).epsilon(1e-14));
    CHECK(m.predict(s)[1] == doctest::Approx(q).epsilon(1e-14));
    Eigen::MatrixXd J = m.jacobian(s);
    auto [dp, dq] = smib_outputs_dx1(x, d);
    CHECK(J(0, 0) == dp);
    CHECK(J(1, 0) == dq);
    CHECK(J.rightCols(J.cols() - 1).isZero());
}

TEST_CASE("measurement at the equilibrium is the mechanical power") {
    const Fixture& f = fixture();
    const SmibDerived& d = f.data.model.derived;
    double origin[2] = {0.0, 0.0};
    for (const auto* dec : {&f.lie(), &f.p3()}) {
        MeasurementModel m = build_measurement(*dec, d);
        CHECK(std::abs(m.predict(dec->dictionary.evaluate(origin))[0] - d.Pm) <= 1e-10);
    }
}

TEST_CASE("filter without information follows the Koopman prediction") {
    const Fixture& f = fixture();
    const KoopmanDecomposition& dec = f.lie();
    MeasurementModel m = build_measurement(dec, f.data.model.derived);
    NoiseSpec noise = NoiseSpec::isotropic(dec.dictionary.q(), 0.0, 1e-4, 0.0);
    FilterOptions opts;
    opts.relift = false;
    const double x0[2] = {-0.5, -0.75};
    FilterState fs = kkf_init(dec, x0, 0.0);
    Prediction pred = predict(dec, x0, 100);
    double worst = 0.0;
    for (int k = 1; k <= 100; ++k) {
        Eigen::Vector2d z(0.0, 0.0);
        fs = kkf_step(fs, z, dec, m, noise, opts);
        worst = std::max({worst, std::abs(fs.s[0] - pred.trajectory.states(k, 0)),
                          std::abs(fs.s[1] - pred.trajectory.states(k, 1))});
    }
    CHECK(fs.k == 100);
    CHECK(worst <= 1e-8);
}

TEST_CASE("zero noise run at the equilibrium stays there") {
    const Fixture& f = fixture();
    const KoopmanDecomposition& dec = f.p3();
    MeasurementModel m = build_measurement(dec, f.data.model.derived);
    NoiseSpec noise = NoiseSpec::isotropic(dec.dictionary.q(), 1e-6, 1e-4, 0.0);
    KkfRunOptions opts;
    opts.guess = {0.0, 0.0};
    opts.P0_scale = 0.0;
    const double x0[2] = {0.0, 0.0};
    KkfRun run = kkf_run(f.data.model.system, x0, dec, m, noise, 3, opts);
    CHECK(run.truth.states.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(run.stats.max_eps_delta <= 1e-12);
    CHECK(run.stats.max_eps_omega <= 1e-12);
}

TEST_CASE("a diffuse prior lets the first update follow the measurement") {
    const Fixture& f = fixture();
    const KoopmanDecomposition& dec = f.lie();
    MeasurementModel m = build_measurement(dec, f.data.model.derived);
    NoiseSpec noise = NoiseSpec::isotropic(dec.dictionary.q(), 1e-6, 1e-4, 0.0);
    FilterOptions opts;
    opts.relift = false;
    const double guess[2] = {0.0, 0.0};
    FilterState fs = kkf_init(dec, guess, 1e3);
    double truth[2] = {0.3, 0.0};
    auto [p, q] = smib_outputs(truth, f.data.model.derived);
    Eigen::Vector2d z(p, q);
    Eigen::Vector2d prior = m.predict(dec.K * fs.s);
    FilterState next = kkf_step(fs, z, dec, m, noise, opts);
    Eigen::Vector2d post = m.predict(next.s);
    CHECK((post - z).norm() <= 1e-3 * (prior - z).norm());
}

TEST_CASE("covariance stays symmetric positive semidefinite") {
    const Fixture& f = fixture();
    for (const auto* dec : {&f.lie(), &f.p3()}) {
        MeasurementModel m = build_measurement(*dec, f.data.model.derived);
        NoiseSpec noise = NoiseSpec::isotropic(dec->dictionary.q(), 1e-6, 1e-4, 1e-2);
        const double x0[2] = {-1.0, 12.0};
        Trajectory truth = integrate_rk4(f.data.model.system, x0, dec->dt, 400, 5);
        const double guess[2] = {0.0, 0.0};
        FilterState fs = kkf_init(*dec, guess, 10.0);
        std::mt19937_64 rng(9);
        std::normal_distribution<double> unit;
        for (int k = 1; k <= 400; ++k) {
            double x[2] = {truth.states(k, 0), truth.states(k, 1)};
            auto [p, q] = smib_outputs(x, f.data.model.derived);
            fs = kkf_step(fs, {p + 1e-2 * unit(rng), q + 1e-2 * unit(rng)}, *dec, m, noise);
            CHECK((fs.P - fs.P.transpose()).norm() == 0.0);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fs.P, Eigen::EigenvaluesOnly);
            CHECK(es.eigenvalues().minCoeff() >= -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff()));
        }
    }
}

TEST_CASE("runs are deterministic in the seed") {
    const Fixture& f = fixture();
    const KoopmanDecomposition& dec = f.lie();
    MeasurementModel m = build_measurement(dec, f.data.model.derived);
    NoiseSpec noise = NoiseSpec::isotropic(dec.dictionary.q(), 1e-6, 1e-4, 1e-2);
    KkfRunOptions opts;
    opts.duration = 2.0;
    const double x0[2] = {2.1, 2.1};
    const std::string a = csv(kkf_run(f.data.model.system, x0, dec, m, noise, 42, opts));
    const std::string b = csv(kkf_run(f.data.model.system, x0, dec, m, noise, 42, opts));
    const std::string c = csv(kkf_run(f.data.model.system, x0, dec, m, noise, 43, opts));
    CHECK(a == b);
    CHECK(a != c);
    CHECK(std::count(a.begin(), a.end(), '\n') == 401);
    CHECK(a.rfind("t,delta_true,omega_true,delta_hat,omega_hat,eps_delta,eps_omega,P_meas,Q_meas\n", 0) == 0);

    CHECK(derive_seed(1, 1, "lie") == derive_seed(1, 1, "lie"));
    CHECK(derive_seed(1, 1, "lie") != derive_seed(1, 2, "lie"));
    CHECK(derive_seed(1, 1, "lie") != derive_seed(1, 1, "p2"));
    CHECK(derive_seed(1, 1, "lie") != derive_seed(2, 1, "lie"));
}

TEST_CASE("filter errors") {
    const Fixture& f = fixture();
    const KoopmanDecomposition& dec = f.lie();
    MeasurementModel m = build_measurement(dec, f.data.model.derived);
    NoiseSpec noise = NoiseSpec::isotropic(dec.dictionary.q(), 1e-6, 1e-4, 1e-2);

    OdeSystem blowup = parse_system("delta' = omega\nomega' = omega^2\n");
    const double x0[2] = {0.0, 1.0};
    try {
        kkf_run(blowup, x0, dec, m, noise, 1);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("domain of attraction") != std::string::npos);
    }

    CHECK_THROWS_AS(NoiseSpec::isotropic(6, 1e-6, 0.0, 1e-2), InvalidArgument);
    CHECK_THROWS_AS(NoiseSpec::isotropic(6, -1.0, 1e-4, 1e-2), InvalidArgument);
    const double three[3] = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(kkf_init(dec, three, 1.0), InvalidArgument);
    FilterState fs = kkf_init(dec, x0, 1.0);
    NoiseSpec wrong = NoiseSpec::isotropic(5, 1e-6, 1e-4, 1e-2);
    CHECK_THROWS_AS(kkf_step(fs, {0.0, 0.0}, dec, m, wrong), InvalidArgument);
    KkfRunOptions opts;
    opts.duration = 0.0;
    CHECK_THROWS_AS(kkf_run(f.data.model.system, x0, dec, m, noise, 1, opts), InvalidArgument);
}
