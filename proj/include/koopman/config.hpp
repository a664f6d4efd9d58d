#pragma once

// Experiment configuration: a flat "key = value" text file whose defaults
// are the published training and test setup.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "koopman/dynamics.hpp"
#include "koopman/polylift.hpp"

namespace koopman {

struct ExperimentConfig {
    SmibParams smib;
    LatticeSpec lattice{{{-0.50, 0.25, 0.50}, {-1.00, 0.25, 1.00}}};
    double dt = 0.005;
    double horizon = 0.8;
    int substeps = 5;
    std::vector<std::string> dictionaries{"lie", "p2", "p3", "p4", "rbf6", "rbf19"};
    std::uint64_t rbf_seed = 2019;
    double sv_rel_tol = 1e-10;

    // filter
    double process_noise = 1e-6;
    double measurement_noise = 1e-4;
    double sigma = 1e-2;
    double P0_scale = 10.0;
    double kkf_duration = 10.0;
    std::vector<double> kkf_guess{0.0, 0.0};
    bool relift = true;
    bool relift_covariance = true;
    std::vector<std::vector<double>> cases{{2.1, 2.1}, {-1.0, 12.0}, {1.5, -15.0}, {-1.7, -1.7}};
    std::uint64_t master_seed = 1;

    std::vector<double> recon_start{-0.50, -0.75};
    double recon_horizon = 0.8;

    std::string output_dir = ".";
    unsigned threads = 0;

    int training_steps() const;
};

// Unknown keys and malformed values throw ParseError naming the line.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});
std::string format_config(const ExperimentConfig& cfg);

// Uniform draws from the bounding box of the training lattice.
std::vector<std::vector<double>> rbf_centers(const ExperimentConfig& cfg, int count);

// "lie", "p<degree>" or "rbf<total>" over the given system.
ObservableSet make_dictionary(const ExperimentConfig& cfg, std::string_view label, const OdeSystem& sys);

}  // namespace koopman
