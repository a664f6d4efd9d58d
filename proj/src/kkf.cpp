#include "koopman/kkf.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "koopman/error.hpp"

namespace koopman {

Eigen::Vector2d MeasurementModel::predict(const Eigen::VectorXd& s) const {
    if (mode == MeasurementMode::Affine) return H * s + c;
    auto [p, q] = smib_outputs(std::span<const double>(s.data(), 1), derived);
    return {p, q};
}

Eigen::MatrixXd MeasurementModel::jacobian(const Eigen::VectorXd& s) const {
    if (mode == MeasurementMode::Affine) return H;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2, s.size());
    auto [dp, dq] = smib_outputs_dx1(std::span<const double>(s.data(), 1), derived);
    J(0, 0) = dp;
    J(1, 0) = dq;
    return J;
}

MeasurementModel build_measurement(const KoopmanDecomposition& dec, const SmibDerived& d) {
    const ObservableSet& obs = dec.dictionary;
    MeasurementModel m;
    m.derived = d;
    const auto q = static_cast<Eigen::Index>(obs.q());
    m.H = Eigen::MatrixXd::Zero(2, q);
    const Expr x1 = Expr::variable(obs.state_names().at(0));
    const auto is = obs.find(Expr::sin(x1));
    const auto ic = obs.find(Expr::cos(x1));
    if (!is || !ic) {
        m.mode = MeasurementMode::Linearized;
        return m;
    }
    m.mode = MeasurementMode::Affine;
    const double a = d.E_mag * d.V2;
    const double cd = std::cos(d.delta0), sd = std::sin(d.delta0);
    // cos(x1 + d0) = cd cos x1 - sd sin x1, sin(x1 + d0) = cd sin x1 + sd cos x1
    const Eigen::Index cs = static_cast<Eigen::Index>(*is), cc = static_cast<Eigen::Index>(*ic);
    m.H(0, cc) = -a * d.G_eq * cd - a * d.B_eq * sd;
    m.H(0, cs) = a * d.G_eq * sd - a * d.B_eq * cd;
    m.H(1, cc) = a * d.B_eq * cd - a * d.G_eq * sd;
    m.H(1, cs) = -a * d.B_eq * sd - a * d.G_eq * cd;
    m.c << d.E_mag * d.E_mag * d.G_eq, -d.E_mag * d.E_mag * d.B_eq;
    return m;
}

NoiseSpec NoiseSpec::isotropic(std::size_t q, double qw, double rv, double sigma) {
    if (qw < 0.0 || !(rv > 0.0) || sigma < 0.0) throw InvalidArgument("invalid noise levels");
    const auto n = static_cast<Eigen::Index>(q);
    return {qw * Eigen::MatrixXd::Identity(n, n), rv * Eigen::Matrix2d::Identity(), sigma};
}

FilterState kkf_init(const KoopmanDecomposition& dec, std::span<const double> x0_guess, double P0_scale) {
    if (x0_guess.size() != dec.dictionary.n()) throw InvalidArgument("initial guess has the wrong dimension");
    if (P0_scale < 0.0) throw InvalidArgument("P0 scale must be nonnegative");
    FilterState fs;
    fs.s = dec.dictionary.evaluate(x0_guess);
    const auto q = fs.s.size();
    fs.P = P0_scale * Eigen::MatrixXd::Identity(q, q);
    return fs;
}

FilterState kkf_step(const FilterState& fs, const Eigen::Vector2d& z, const KoopmanDecomposition& dec,
                     const MeasurementModel& meas, const NoiseSpec& noise, const FilterOptions& opts) {
    const Eigen::MatrixXd& K = dec.K;
    const Eigen::Index q = K.rows();
    if (fs.s.size() != q || fs.P.rows() != q || noise.Qw.rows() != q) {
        throw InvalidArgument("filter state does not match the model size");
    }
    FilterState out;
    out.k = fs.k + 1;
    Eigen::VectorXd s = K * fs.s;
    Eigen::MatrixXd P = K * fs.P * K.transpose() + noise.Qw;

    const Eigen::MatrixXd H = meas.jacobian(s);
    const Eigen::Vector2d innovation = z - meas.predict(s);
    const Eigen::Matrix2d S = H * P * H.transpose() + noise.Rv;
    Eigen::LDLT<Eigen::Matrix2d> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || std::abs(S.determinant()) <= 1e-300) {
        throw NumericalError("innovation covariance is not invertible at step " + std::to_string(out.k));
    }
    const Eigen::MatrixXd gain = ldlt.solve(H * P).transpose();
    s += gain * innovation;
    const Eigen::MatrixXd IKH = Eigen::MatrixXd::Identity(q, q) - gain * H;
    P = IKH * P * IKH.transpose() + gain * noise.Rv * gain.transpose();

    if (opts.relift) {
        const std::size_t n = dec.dictionary.n();
        std::vector<double> x(s.data(), s.data() + n);
        s = dec.dictionary.evaluate(x);
        if (opts.relift_covariance) {
            const Eigen::MatrixXd J = dec.dictionary.jacobian(x);
            const Eigen::MatrixXd Pxx = P.topLeftCorner(n, n);
            P = J * Pxx * J.transpose();
        }
    }
    P = (0.5 * (P + P.transpose())).eval();
    if (!s.allFinite() || !P.allFinite()) throw NumericalError("filter diverged at step " + std::to_string(out.k));
    if (opts.check_psd) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
        const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
            throw NumericalError("covariance lost positive semidefiniteness at step " + std::to_string(out.k));
        }
    }
    out.s = std::move(s);
    out.P = std::move(P);
    return out;
}

KkfRun kkf_run(const OdeSystem& truth_system, std::span<const double> x0, const KoopmanDecomposition& dec,
               const MeasurementModel& meas, const NoiseSpec& noise, std::uint64_t seed, const KkfRunOptions& opts) {
    if (!(opts.duration > 0.0)) throw InvalidArgument("duration must be positive");
    const std::size_t n = dec.dictionary.n();
    if (x0.size() != n || truth_system.dimension() != n) throw InvalidArgument("state dimension mismatch");
    const int steps = static_cast<int>(std::lround(opts.duration / dec.dt));
    if (steps < 1) throw InvalidArgument("duration is shorter than one sample");

    KkfRun run;
    try {
        run.truth = integrate_rk4(truth_system, x0, dec.dt, steps, opts.substeps);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("truth trajectory diverged; start is outside the domain of attraction: ") +
                             e.what());
    }

    std::vector<double> guess = opts.guess.empty() ? std::vector<double>(n, 0.0) : opts.guess;
    FilterState fs = kkf_init(dec, guess, opts.P0_scale);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    run.estimate.dt = dec.dt;
    run.estimate.states.resize(steps + 1, static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) run.estimate.states(0, j) = fs.s[j];
    run.measurements.resize(steps, 2);
    run.eps_delta.resize(steps);
    run.eps_omega.resize(steps);

    for (int k = 1; k <= steps; ++k) {
        const Eigen::VectorXd truth = run.truth.states.row(k).transpose();
        auto [p, qv] = smib_outputs(std::span<const double>(truth.data(), truth.size()), meas.derived);
        Eigen::Vector2d z(p + noise.sigma * unit(rng), qv + noise.sigma * unit(rng));
        run.measurements.row(k - 1) = z.transpose();
        fs = kkf_step(fs, z, dec, meas, noise, opts.filter);
        for (std::size_t j = 0; j < n; ++j) run.estimate.states(k, j) = fs.s[j];
        run.eps_delta[k - 1] = std::abs(fs.s[0] - truth[0]);
        run.eps_omega[k - 1] = n > 1 ? std::abs(fs.s[1] - truth[1]) : 0.0;
    }
    run.stats = {run.eps_delta.maxCoeff(), run.eps_omega.maxCoeff(), run.eps_delta.sum(), run.eps_omega.sum()};
    return run;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, int case_index, std::string_view dictionary) {
    std::uint64_t h = splitmix(master);
    h = splitmix(h ^ static_cast<std::uint64_t>(case_index));
    for (unsigned char ch : dictionary) h = splitmix(h ^ ch);
    return h;
}

void write_kkf_csv(std::ostream& os, const KkfRun& run) {
    os << "t,delta_true,omega_true,delta_hat,omega_hat,eps_delta,eps_omega,P_meas,Q_meas\n" << std::setprecision(17);
    const double dt = run.truth.dt;
    for (Eigen::Index k = 1; k < run.truth.samples(); ++k) {
        os << static_cast<double>(k) * dt << ',' << run.truth.states(k, 0) << ',' << run.truth.states(k, 1) << ','
           << run.estimate.states(k, 0) << ',' << run.estimate.states(k, 1) << ',' << run.eps_delta[k - 1] << ','
           << run.eps_omega[k - 1] << ',' << run.measurements(k - 1, 0) << ',' << run.measurements(k - 1, 1)
           << "\n";
    }
}

}  // namespace koopman
