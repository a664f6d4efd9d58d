#pragma once

// Kalman filter on the lifted Koopman state with real and reactive power
// measurements of the machine model.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "koopman/dynamics.hpp"
#include "koopman/edmd.hpp"

namespace koopman {

enum class MeasurementMode { Affine, Linearized };

// (P_e, Q_e) as a function of the lifted state s.
struct MeasurementModel {
    MeasurementMode mode = MeasurementMode::Linearized;
    Eigen::MatrixXd H;   // 2 x q; exact in affine mode, the Jacobian at s otherwise
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    SmibDerived derived;

    Eigen::Vector2d predict(const Eigen::VectorXd& s) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& s) const;
};

// Affine when sin and cos of the first state are dictionary entries.
MeasurementModel build_measurement(const KoopmanDecomposition& dec, const SmibDerived& d);

struct NoiseSpec {
    Eigen::MatrixXd Qw;  // q x q process covariance
    Eigen::Matrix2d Rv;  // measurement covariance assumed by the filter
    double sigma = 0.0;  // standard deviation of the simulated measurement noise

    static NoiseSpec isotropic(std::size_t q, double qw, double rv, double sigma);
};

struct FilterOptions {
    bool relift = true;             // s <- g(P s) after each update
    bool relift_covariance = true;  // P <- J P_xx J^T alongside
    bool check_psd = true;
};

struct FilterState {
    Eigen::VectorXd s;
    Eigen::MatrixXd P;
    int k = 0;
};

FilterState kkf_init(const KoopmanDecomposition& dec, std::span<const double> x0_guess, double P0_scale);

// One predict/update cycle with Joseph-form covariance update. Throws
// NumericalError if the innovation covariance is singular or the
// covariance loses positive semidefiniteness.
FilterState kkf_step(const FilterState& fs, const Eigen::Vector2d& z, const KoopmanDecomposition& dec,
                     const MeasurementModel& meas, const NoiseSpec& noise, const FilterOptions& opts = {});

struct KkfStats {
    double max_eps_delta = 0.0;
    double max_eps_omega = 0.0;
    double sum_eps_delta = 0.0;
    double sum_eps_omega = 0.0;
};

struct KkfRunOptions {
    double duration = 10.0;
    std::vector<double> guess;  // empty means the origin
    double P0_scale = 10.0;
    int substeps = 5;
    FilterOptions filter;
};

// Rows are steps 1..N, the samples after each update.
struct KkfRun {
    Trajectory truth;     // includes t = 0
    Trajectory estimate;  // includes the initial guess at t = 0
    Eigen::MatrixXd measurements;  // N x 2
    Eigen::VectorXd eps_delta;
    Eigen::VectorXd eps_omega;
    KkfStats stats;
};

KkfRun kkf_run(const OdeSystem& truth_system, std::span<const double> x0, const KoopmanDecomposition& dec,
               const MeasurementModel& meas, const NoiseSpec& noise, std::uint64_t seed,
               const KkfRunOptions& opts = {});

// Deterministic per-run seed from the master seed, case number and
// dictionary label.
std::uint64_t derive_seed(std::uint64_t master, int case_index, std::string_view dictionary);

// t,delta_true,omega_true,delta_hat,omega_hat,eps_delta,eps_omega,P_meas,Q_meas
void write_kkf_csv(std::ostream& os, const KkfRun& run);

}  // namespace koopman
