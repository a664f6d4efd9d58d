#pragma once

// Experiment harness: trains every configured dictionary on the lattice
// data and produces the spectrum, filter and reconstruction tables.

#include <complex>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "koopman/config.hpp"
#include "koopman/edmd.hpp"
#include "koopman/kkf.hpp"

namespace koopman {

struct ResultTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write_csv(std::ostream& os) const;
    std::string to_csv() const;
    // Inverse of to_csv; fields with commas, quotes or newlines are quoted.
    static ResultTable from_csv(std::string_view text);
};

struct TrainingData {
    SmibModel model;
    SnapshotPair snapshots;
};

TrainingData build_training_data(const ExperimentConfig& cfg);

struct TrainedDictionary {
    std::string label;
    FitResult fit;
    KoopmanDecomposition decomposition;
    PrincipalPair principal;
};

std::vector<TrainedDictionary> train_dictionaries(const ExperimentConfig& cfg, const TrainingData& data,
                                                  std::complex<double> reference);

struct RelativeErrors {
    double re_pct = 0.0;
    double im_pct = 0.0;
    double xi_pct = 0.0;
};

RelativeErrors principal_errors(std::complex<double> estimate, std::complex<double> truth);

struct SpectrumBench {
    TrainingData data;
    LinearizationResult reference;
    std::vector<TrainedDictionary> models;
    ResultTable table3;  // principal pair per dictionary
    ResultTable table4;  // dimension and relative errors
};

SpectrumBench run_spectrum_bench(const ExperimentConfig& cfg);
// spectrum_<dict>.csv, table3.csv, table4.csv
void write_spectrum_outputs(const SpectrumBench& b, const std::string& dir);

struct KkfBench {
    std::vector<std::string> labels;
    std::vector<std::vector<KkfRun>> runs;  // [case][dictionary]
    ResultTable table6;
};

// Uses cfg.master_seed; reuses already trained models.
KkfBench run_kkf_bench(const ExperimentConfig& cfg, const SpectrumBench& trained);
// table6.csv, kkf_case<i>_<dict>.csv
void write_kkf_outputs(const KkfBench& b, const std::string& dir);

struct Reconstruction {
    std::vector<double> start;
    Trajectory truth;
    std::vector<std::string> labels;
    std::vector<Prediction> predictions;
    std::vector<double> max_abs_delta_error;
};

Reconstruction run_reconstruction(const ExperimentConfig& cfg, const SpectrumBench& trained,
                                  const std::vector<double>& start);
// recon_<start>.csv
void write_reconstruction(const Reconstruction& r, const std::string& dir);
std::string reconstruction_filename(const std::vector<double>& start);

}  // namespace koopman
