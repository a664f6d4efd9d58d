#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "koopman/edmd.hpp"
#include "koopman/error.hpp"

using namespace koopman;

namespace {

// exp(A) by scaling and squaring of a truncated Taylor series.
Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
    int s = std::max(0, static_cast<int>(std::ceil(std::log2(std::max(A.norm(), 1e-300)))) + 4);
    Eigen::MatrixXd B = A / std::pow(2.0, s);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    Eigen::MatrixXd sum = term;
    for (int k = 1; k < 20; ++k) {
        term = term * B / k;
        sum += term;
    }
    for (int i = 0; i < s; ++i) sum = sum * sum;
    return sum;
}

ObservableSet identity(int n) { return monomial_dictionary(n, 1); }

const char* kLinear = "x1' = -0.3*x1 + 2*x2\nx2' = -2*x1 - 0.3*x2\n";

std::vector<Trajectory> linear_data() {
    OdeSystem sys = parse_system(kLinear);
    std::vector<Trajectory> out;
    for (auto x0 : sample_lattice(LatticeSpec{{{-1, 1, 1}, {-1, 1, 1}}})) {
        out.push_back(integrate_rk4(sys, x0, 0.01, 50, 10));
    }
    return out;
}

KoopmanDecomposition linear_model() {
    SnapshotPair s = build_snapshots(linear_data());
    ObservableSet obs = identity(2);
    FitResult f = fit(apply_dictionary(obs, s));
    return decompose(f.K, obs, s.dt);
}

}  // namespace

TEST_CASE("snapshot assembly") {
    SmibModel m = smib_build();
    auto starts = sample_lattice(LatticeSpec{{{-0.5, 0.25, 0.5}, {-1.0, 0.25, 1.0}}});
    auto trajs = integrate_many(m.system, starts, 0.005, 160);
    SnapshotPair s = build_snapshots(trajs);
    CHECK(s.X.cols() == 7200);
    CHECK(s.X.rows() == 2);
    // the last state of trajectory 0 is never paired with trajectory 1
    CHECK(s.X.col(160) == trajs[1].states.row(0).transpose());
    CHECK(s.Xp.col(159) == trajs[0].states.row(160).transpose());

    Trajectory two;
    two.dt = 0.1;
    two.states.resize(2, 1);
    two.states << 1.0, 2.0;
    SnapshotPair one = build_snapshots({two});
    CHECK(one.X.cols() == 1);
    CHECK(one.Xp(0, 0) == 2.0);

    CHECK_THROWS_AS(build_snapshots({}), InvalidArgument);
    Trajectory other = two;
    other.dt = 0.2;
    CHECK_THROWS_AS(build_snapshots({two, other}), InvalidArgument);
}

TEST_CASE("dictionary application") {
    SnapshotPair s = build_snapshots(linear_data());
    DictionaryMatrices dm = apply_dictionary(identity(2), s, 2);
    CHECK(dm.G == s.X);
    CHECK(dm.Gp == s.Xp);
    ObservableSet lie = observables_from_lift(lift(smib_build().system));
    CHECK_THROWS_AS(apply_dictionary(monomial_dictionary(3, 1), s), InvalidArgument);
    SnapshotPair bad = s;
    bad.X(0, 3) = -1.0;
    ObservableSet logs(DictionaryKind::Lie, {"x1", "x2"}, {{parse("x1"), {}}, {parse("x2"), {}}, {parse("ln(x1 + 2)"), {}}});
    bad.X(0, 3) = -5.0;
    CHECK_THROWS_AS(apply_dictionary(logs, bad), EvalError);
}

TEST_CASE("fit basics") {
    DictionaryMatrices id{Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3)};
    CHECK(fit(id).K.isApprox(Eigen::MatrixXd::Identity(3, 3)));

    Eigen::MatrixXd A(2, 2);
    A << -0.3, 2.0, -2.0, -0.3;
    SnapshotPair s = build_snapshots(linear_data());
    FitResult f = fit(apply_dictionary(identity(2), s));
    CHECK((f.K - expm(A * 0.01)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(f.rank == 2);
    CHECK(f.warnings.empty());

    DictionaryMatrices zero{Eigen::MatrixXd::Zero(2, 4), Eigen::MatrixXd::Zero(2, 4)};
    CHECK_THROWS_AS(fit(zero), NumericalError);
    DictionaryMatrices wide{Eigen::MatrixXd::Random(4, 2), Eigen::MatrixXd::Random(4, 2)};
    CHECK_FALSE(fit(wide).warnings.empty());
}

TEST_CASE("rank deficient fit matches normal equations") {
    // third row of G is the sum of the first two
    Eigen::MatrixXd G(3, 5);
    G << 1, 2, 0, -1, 3, 0, 1, 1, 2, -1, 1, 3, 1, 1, 2;
    Eigen::MatrixXd B(3, 3);
    B << 0.5, 0.1, 0.0, -0.2, 0.9, 0.3, 0.1, 0.0, 0.7;
    Eigen::MatrixXd Gp = B * G;
    FitResult f = fit({G, Gp});
    CHECK(f.rank == 2);
    // normal equations on the independent rows [g1; g2]
    Eigen::MatrixXd G2 = G.topRows(2);
    Eigen::MatrixXd K2 = Gp * G2.transpose() * (G2 * G2.transpose()).inverse();
    double brute = (Gp - K2 * G2).norm();
    CHECK(std::abs(f.residual - brute) <= 1e-10);
    // minimum norm: K rows lie in the row space of G G^T
    Eigen::Vector3d null(1, 1, -1);
    CHECK((f.K * null).norm() <= 1e-10);
}

TEST_CASE("least squares optimality") {
    std::mt19937 rng(42u);
    std::normal_distribution<double> z;
    for (int inst = 0; inst < 5; ++inst) {
        const int q = 2 + inst % 3, m = 6 + inst;
        Eigen::MatrixXd G(q, m), Gp(q, m);
        for (int i = 0; i < q; ++i)
            for (int k = 0; k < m; ++k) {
                G(i, k) = z(rng);
                Gp(i, k) = z(rng);
            }
        FitResult f = fit({G, Gp});
        for (int trial = 0; trial < 1000; ++trial) {
            Eigen::MatrixXd D(q, q);
            for (int i = 0; i < q; ++i)
                for (int j = 0; j < q; ++j) D(i, j) = z(rng);
            CHECK(f.residual <= (Gp - (f.K + 1e-3 * D) * G).norm());
        }
    }
}

TEST_CASE("decomposition of a diagonal matrix") {
    Eigen::MatrixXd K(2, 2);
    K << 0.9, 0.0, 0.0, 0.5;
    KoopmanDecomposition d = decompose(K, identity(2), 0.1);
    CHECK(d.lambda_c[0].real() == doctest::Approx(std::log(0.9) / 0.1));
    CHECK(d.lambda_c[1].real() == doctest::Approx(std::log(0.5) / 0.1));
    CHECK(d.lambda_c[0].imag() == 0.0);
    CHECK(d.U.isApprox(d.Rv.topRows(2)));

    Eigen::MatrixXd J(2, 2);
    J << 1.0, 1.0, 0.0, 1.0;
    CHECK_THROWS_AS(decompose(J, identity(2), 0.1), NumericalError);
    CHECK_THROWS_AS(decompose(K, identity(3), 0.1), InvalidArgument);
}

TEST_CASE("decomposition invariants on the machine model") {
    SmibModel m = smib_build();
    auto trajs = integrate_many(m.system, sample_lattice(LatticeSpec{{{-0.5, 0.25, 0.5}, {-1.0, 0.25, 1.0}}}),
                                0.005, 160);
    SnapshotPair s = build_snapshots(trajs);
    std::vector<ObservableSet> dicts{observables_from_lift(lift(m.system)), monomial_dictionary(m.system.state_names, 2),
                                     monomial_dictionary(m.system.state_names, 3)};
    for (const ObservableSet& obs : dicts) {
        DictionaryMatrices dm = apply_dictionary(obs, s);
        FitResult f = fit(dm);
        KoopmanDecomposition d = decompose(f.K, obs, s.dt);
        const auto q = static_cast<Eigen::Index>(obs.q());
        CHECK(d.lambda_c.size() == q);
        Eigen::MatrixXcd Kc = f.K.cast<std::complex<double>>();
        CHECK((Kc * d.Rv - d.Rv * d.lambda_d.asDiagonal()).norm() <= 1e-8 * f.K.norm());
        CHECK((d.L * d.Rv - Eigen::MatrixXcd::Identity(q, q)).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(d.U == d.Rv.topRows(2));
        for (Eigen::Index i = 0; i < q; ++i) {
            CHECK(d.Rv.col(i).norm() == doctest::Approx(1.0));
            if (i + 1 < q) CHECK(d.lambda_c[i].real() >= d.lambda_c[i + 1].real());
            if (d.lambda_c[i].imag() > 0) {
                REQUIRE(i + 1 < q);
                CHECK(std::abs(d.lambda_c[i + 1] - std::conj(d.lambda_c[i])) <= 1e-9);
            }
        }

        // sum of one-step residuals is the fit residual
        double r2 = 0.0;
        for (Eigen::Index k = 0; k < s.X.cols(); ++k) {
            Eigen::VectorXd x = s.X.col(k), xp = s.Xp.col(k);
            r2 += (obs.evaluate(std::span<const double>(xp.data(), 2)) -
                   f.K * obs.evaluate(std::span<const double>(x.data(), 2)))
                      .squaredNorm();
        }
        CHECK(std::sqrt(r2) == doctest::Approx(f.residual).epsilon(1e-8));

        std::mt19937 rng(9u);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int trial = 0; trial < 10; ++trial) {
            double x[2] = {u(rng), u(rng)};
            Eigen::VectorXcd phi = eigenfunctions(d, x);
            Eigen::VectorXd g = obs.evaluate(x);
            CHECK((d.Rv * phi - g.cast<std::complex<double>>()).norm() <= 1e-8 * std::max(1.0, g.norm()));
            Eigen::VectorXcd ux = d.U * phi;
            CHECK(std::abs(ux[0] - x[0]) <= 1e-8);
            CHECK(std::abs(ux[1] - x[1]) <= 1e-8);

            Prediction p = predict(d, x, 100);
            CHECK(p.max_imag <= 1e-8 * std::max(1.0, p.trajectory.states.cwiseAbs().maxCoeff()));
            CHECK(p.trajectory.states(0, 0) == doctest::Approx(x[0]).epsilon(1e-12));
            CHECK(p.trajectory.states(0, 1) == doctest::Approx(x[1]).epsilon(1e-12));
        }
        double origin[2] = {0.0, 0.0};
        Eigen::VectorXcd phi0 = eigenfunctions(d, origin);
        CHECK((phi0 - d.L * obs.evaluate(origin).cast<std::complex<double>>()).norm() == 0.0);
    }
}

TEST_CASE("prediction of a linear system") {
    KoopmanDecomposition d = linear_model();
    double x0[2] = {0.7, -0.4};
    Prediction p = predict(d, x0, 100);
    Trajectory truth = integrate_rk4(parse_system(kLinear), x0, 0.01, 100, 10);
    CHECK((p.trajectory.states - truth.states).cwiseAbs().maxCoeff() <= 1e-5);
    CHECK(p.trajectory.samples() == 101);
    CHECK_THROWS_AS(predict(d, x0, -1), InvalidArgument);
}

TEST_CASE("principal pair selection") {
    KoopmanDecomposition d = linear_model();
    // eigenvalues of A are -0.3 +- 2j
    PrincipalPair p = principal_eigenpair(d, {-0.3, 2.0});
    CHECK(p.lambda.imag() > 0);
    CHECK(p.distance <= 1e-6);
    PrincipalPair self = principal_eigenpair(d, d.lambda_c[p.index]);
    CHECK(self.distance == 0.0);
    CHECK(self.index == p.index);

    Eigen::MatrixXd K(2, 2);
    K << 0.9, 0.0, 0.0, 0.5;
    CHECK_THROWS_AS(principal_eigenpair(decompose(K, identity(2), 0.1), {-0.5, 8.85}), InvalidArgument);
}

TEST_CASE("spectrum csv and model documents") {
    KoopmanDecomposition d = linear_model();
    PrincipalPair p = principal_eigenpair(d, {-0.3, 2.0});
    std::ostringstream os;
    write_spectrum_csv(os, d, p.index);
    std::string csv = os.str();
    CHECK(csv.rfind("re_c,im_c,re_d,im_d,freq_hz,damping_pct,is_principal\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find(",1\n") != std::string::npos);

    KoopmanDecomposition back = load_model(save_model(d));
    CHECK(back.K == d.K);
    CHECK(back.Rv == d.Rv);
    CHECK(back.L == d.L);
    CHECK(back.U == d.U);
    CHECK(back.lambda_d == d.lambda_d);
    CHECK(back.dictionary.q() == d.dictionary.q());
    CHECK(back.dictionary.label() == "p1");

    ObservableSet lie = observables_from_lift(lift(smib_build().system));
    ObservableSet rbf = rbf_dictionary({"delta", "omega"}, 3, {{0.1, 0.2}});
    for (const ObservableSet& obs : {lie, rbf}) {
        double x[2] = {0.3, -0.2};
        const auto q = static_cast<Eigen::Index>(obs.q());
        KoopmanDecomposition t = decompose(0.9 * Eigen::MatrixXd::Identity(q, q), obs, 0.1);
        ObservableSet re = load_model(save_model(t)).dictionary;
        CHECK(re.label() == obs.label());
        CHECK(re.evaluate(x) == obs.evaluate(x));
    }
    CHECK_THROWS_AS(load_model("{"), ParseError);
    CHECK_THROWS_AS(load_model("{\"format\": \"other\"}"), InvalidArgument);
}
