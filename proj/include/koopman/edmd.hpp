#pragma once

// Extended dynamic mode decomposition: least-squares Koopman matrix on a
// dictionary of observables, its eigendecomposition, and the modal
// expansion used for prediction.

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "koopman/dynamics.hpp"
#include "koopman/polylift.hpp"

namespace koopman {

struct SnapshotPair {
    Eigen::MatrixXd X;   // n x m
    Eigen::MatrixXd Xp;  // n x m, column k is the dt-successor of X column k
    double dt = 0.0;
};

// Pairs consecutive states within each trajectory, never across two.
SnapshotPair build_snapshots(const std::vector<Trajectory>& trajectories);

struct DictionaryMatrices {
    Eigen::MatrixXd G;   // q x m
    Eigen::MatrixXd Gp;  // q x m
};

DictionaryMatrices apply_dictionary(const ObservableSet& obs, const SnapshotPair& snaps, unsigned threads = 0);

struct FitResult {
    Eigen::MatrixXd K;
    Eigen::VectorXd singular_values;
    int rank = 0;
    double residual = 0.0;  // Frobenius norm of Gp - K G
    std::vector<std::string> warnings;
};

// K = Gp pinv(G), singular values below sv_rel_tol * sigma_max dropped.
FitResult fit(const DictionaryMatrices& dm, double sv_rel_tol = 1e-10);

struct KoopmanDecomposition {
    Eigen::MatrixXd K;
    double dt = 0.0;
    Eigen::VectorXcd lambda_d;
    Eigen::VectorXcd lambda_c;
    Eigen::MatrixXcd Rv;  // unit-norm right eigenvectors as columns
    Eigen::MatrixXcd L;   // Rv^-1
    Eigen::MatrixXcd U;   // n x q Koopman modes
    ObservableSet dictionary;
};

// Eigenvalues sorted by descending continuous-time real part, then
// ascending |imag|, with the positive-imaginary member of a pair first.
// Throws NumericalError when K is numerically defective.
KoopmanDecomposition decompose(const Eigen::MatrixXd& K, const ObservableSet& dictionary, double dt);

Eigen::VectorXcd eigenfunctions(const KoopmanDecomposition& dec, std::span<const double> x);

struct Prediction {
    Trajectory trajectory;
    double max_imag = 0.0;  // largest |Im| discarded when taking the real part
};

Prediction predict(const KoopmanDecomposition& dec, std::span<const double> x0, int steps);

struct PrincipalPair {
    std::complex<double> lambda;  // upper half-plane member, continuous time
    std::size_t index = 0;        // its position in lambda_c
    double distance = 0.0;
};

PrincipalPair principal_eigenpair(const KoopmanDecomposition& dec, std::complex<double> reference);

// re_c,im_c,re_d,im_d,freq_hz,damping_pct,is_principal
void write_spectrum_csv(std::ostream& os, const KoopmanDecomposition& dec,
                        std::optional<std::size_t> principal_index = std::nullopt);

std::string save_model(const KoopmanDecomposition& dec);
KoopmanDecomposition load_model(const std::string& document);

}  // namespace koopman
