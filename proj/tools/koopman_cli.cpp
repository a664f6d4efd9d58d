// Command-line front end. Talks to the library through the C interface only.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "koopman_c.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

struct Failure {
    kp_status status;
    std::string message;
};

void check(kp_status s) {
    if (s != KP_OK) throw Failure{s, kp_last_error()};
}

int exit_code(kp_status s) {
    switch (s) {
        case KP_ERR_NUMERICAL:
        case KP_ERR_EVAL:
        case KP_ERR_INTERNAL:
            return kExitNumerical;
        default:
            return kExitUsage;
    }
}

struct Str {
    char* p = nullptr;
    ~Str() { kp_string_free(p); }
    char** out() { return &p; }
    std::string str() const { return p ? p : ""; }
};

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    ~Handle() { Free(p); }
    T** out() { return &p; }
};

using Config = Handle<kp_config, kp_config_free>;
using System = Handle<kp_system, kp_system_free>;
using Lifted = Handle<kp_lifted, kp_lifted_free>;
using Model = Handle<kp_model, kp_model_free>;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Failure{KP_ERR_IO, "cannot open " + path};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Failure{KP_ERR_IO, "cannot write " + path};
    out << text;
}

struct Globals {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<unsigned long long> seed;
    std::string out_dir;
    std::string format = "csv";
    int threads = -1;
};

void load_config(const Globals& g, Config& cfg) {
    if (g.config_path.empty())
        check(kp_config_default(cfg.out()));
    else
        check(kp_config_load(g.config_path.c_str(), cfg.out()));
    std::string extra;
    for (const auto& o : g.overrides) extra += o + "\n";
    if (g.seed) extra += "seed = " + std::to_string(*g.seed) + "\n";
    if (!g.out_dir.empty()) extra += "output_dir = " + g.out_dir + "\n";
    if (g.threads >= 0) extra += "threads = " + std::to_string(g.threads) + "\n";
    if (!extra.empty()) check(kp_config_apply(cfg.p, extra.c_str()));
}

void load_system(const std::string& path, const Config& cfg, System& sys) {
    if (path.empty())
        check(kp_system_smib(cfg.p, sys.out()));
    else
        check(kp_system_load(path.c_str(), sys.out()));
}

// Principal reference: the Jacobian pair at the origin with the largest
// imaginary part, or -1 if the linearization is real.
std::pair<double, double> reference_mode(const System& sys) {
    std::size_t n = 0;
    check(kp_system_dimension(sys.p, &n));
    std::vector<double> origin(n, 0.0), re(n), im(n);
    check(kp_system_linearize(sys.p, origin.data(), n, re.data(), im.data()));
    std::pair<double, double> best{-1.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        if (im[i] > best.second) best = {re[i], im[i]};
    }
    return best;
}

void train_or_load(const Config& cfg, const std::string& system_path, const std::string& model_path,
                   const std::string& dict, Model& model) {
    if (!model_path.empty()) {
        check(kp_model_load(read_file(model_path).c_str(), model.out()));
        return;
    }
    System sys;
    const kp_system* raw = nullptr;
    if (!system_path.empty()) {
        check(kp_system_load(system_path.c_str(), sys.out()));
        raw = sys.p;
    }
    check(kp_model_train(cfg.p, raw, dict.c_str(), model.out()));
}

std::string table_as_text(const std::string& csv) {
    std::ostringstream os;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        for (char& c : line) {
            if (c == ',') c = '\t';
        }
        os << line << "\n";
    }
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman lifting, EDMD and Koopman Kalman filtering"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "Experiment configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", g.overrides, "Extra configuration line, e.g. --set 'dt = 0.01'");
    app.add_option("--seed", g.seed, "Master seed for the filter runs");
    app.add_option("--out-dir", g.out_dir, "Directory for benchmark outputs");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "text"}));
    app.add_option("--threads", g.threads, "Worker threads, 0 for all cores");

    std::string lift_file;
    int max_rounds = 10;
    auto* lift_cmd = app.add_subcommand("lift", "Polynomialize a system and print the lift and dictionary");
    lift_cmd->add_option("system", lift_file, "System file")->required()->check(CLI::ExistingFile);
    lift_cmd->add_option("--max-rounds", max_rounds, "Lifting round limit");

    std::string system_path, output;
    std::vector<double> x0;
    double dt = 0.005;
    int steps = 160, substeps = 5;
    auto* sim_cmd = app.add_subcommand("simulate", "RK4 trajectory of a system as CSV");
    sim_cmd->add_option("--system", system_path, "System file; the machine model when omitted");
    sim_cmd->add_option("--x0", x0, "Initial state")->delimiter(',')->required();
    sim_cmd->add_option("--dt", dt, "Output step");
    sim_cmd->add_option("--steps", steps, "Number of output steps");
    sim_cmd->add_option("--substeps", substeps, "RK4 steps per output step");
    sim_cmd->add_option("-o,--output", output, "Output file");

    std::string dict = "lie", model_path;
    auto* edmd_cmd = app.add_subcommand("edmd", "Train an EDMD model and print its spectrum");
    edmd_cmd->add_option("--system", system_path, "System file; the machine model when omitted");
    edmd_cmd->add_option("--dict", dict, "lie, p<degree> or rbf<size>");
    edmd_cmd->add_option("--save", model_path, "Write the trained model here");
    edmd_cmd->add_option("-o,--output", output, "Spectrum output file");

    auto* predict_cmd = app.add_subcommand("predict", "Modal prediction from a trained or saved model");
    std::string load_path;
    predict_cmd->add_option("--model", load_path, "Saved model")->check(CLI::ExistingFile);
    predict_cmd->add_option("--system", system_path, "System file for training");
    predict_cmd->add_option("--dict", dict, "Dictionary used when training");
    predict_cmd->add_option("--x0", x0, "Initial state")->delimiter(',')->required();
    predict_cmd->add_option("--steps", steps, "Number of steps");
    predict_cmd->add_option("-o,--output", output, "Output file");

    auto* kkf_cmd = app.add_subcommand("kkf", "Koopman Kalman filter run on the machine model");
    kkf_cmd->add_option("--model", load_path, "Saved model")->check(CLI::ExistingFile);
    kkf_cmd->add_option("--dict", dict, "Dictionary used when training");
    kkf_cmd->add_option("--x0", x0, "True initial state")->delimiter(',')->required();
    kkf_cmd->add_option("-o,--output", output, "Per-step CSV output file");

    auto* bench_cmd = app.add_subcommand("bench", "Run an experiment and write its tables");
    std::string which;
    bench_cmd->add_option("experiment", which, "spectrum, kkf or reconstruct")
        ->required()
        ->check(CLI::IsMember({"spectrum", "kkf", "reconstruct"}));

    auto* info_cmd = app.add_subcommand("info", "Print the derived machine constants and the configuration");

    if (argc <= 1) {
        std::cerr << app.help();
        return kExitUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        Config cfg;
        load_config(g, cfg);

        if (*lift_cmd) {
            System sys;
            check(kp_system_load(lift_file.c_str(), sys.out()));
            Lifted ls;
            check(kp_lift(sys.p, max_rounds, ls.out()));
            Str text;
            check(kp_lifted_to_string(ls.p, text.out()));
            std::cout << text.str();
        } else if (*sim_cmd) {
            System sys;
            load_system(system_path, cfg, sys);
            Str csv;
            check(kp_simulate_csv(sys.p, x0.data(), x0.size(), dt, steps, substeps, csv.out()));
            write_output(csv.str(), output);
        } else if (*edmd_cmd) {
            System sys;
            load_system(system_path, cfg, sys);
            Model model;
            check(kp_model_train(cfg.p, system_path.empty() ? nullptr : sys.p, dict.c_str(), model.out()));
            if (!model_path.empty()) {
                Str doc;
                check(kp_model_save(model.p, doc.out()));
                write_output(doc.str(), model_path);
            }
            auto [rr, ri] = reference_mode(sys);
            Str csv;
            check(kp_model_spectrum_csv(model.p, rr, ri, csv.out()));
            write_output(g.format == "text" ? table_as_text(csv.str()) : csv.str(), output);
        } else if (*predict_cmd) {
            Model model;
            train_or_load(cfg, system_path, load_path, dict, model);
            Str csv;
            check(kp_model_predict_csv(model.p, x0.data(), x0.size(), steps, csv.out()));
            write_output(csv.str(), output);
        } else if (*kkf_cmd) {
            Model model;
            train_or_load(cfg, "", load_path, dict, model);
            double stats[4];
            Str csv;
            const uint64_t seed = g.seed ? *g.seed : 1;
            check(kp_kkf_run(cfg.p, model.p, x0.data(), x0.size(), seed, stats, output.empty() ? nullptr : csv.out()));
            if (!output.empty()) write_output(csv.str(), output);
            std::ostringstream os;
            os.precision(10);
            if (g.format == "text") {
                os << "max_eps_delta = " << stats[0] << "\nmax_eps_omega = " << stats[1]
                   << "\nsum_eps_delta = " << stats[2] << "\nsum_eps_omega = " << stats[3] << "\n";
            } else {
                os << "max_eps_delta,max_eps_omega,sum_eps_delta,sum_eps_omega\n"
                   << stats[0] << "," << stats[1] << "," << stats[2] << "," << stats[3] << "\n";
            }
            std::cout << os.str();
        } else if (*bench_cmd) {
            const char* dir = g.out_dir.empty() ? nullptr : g.out_dir.c_str();
            Str table;
            if (which == "spectrum")
                check(kp_bench_spectrum(cfg.p, dir, table.out()));
            else if (which == "kkf")
                check(kp_bench_kkf(cfg.p, dir, table.out()));
            else
                check(kp_bench_reconstruct(cfg.p, dir, table.out()));
            std::cout << (g.format == "text" ? table_as_text(table.str()) : table.str());
        } else if (*info_cmd) {
            Str report, text;
            check(kp_smib_report(cfg.p, report.out()));
            check(kp_config_to_string(cfg.p, text.out()));
            std::cout << report.str() << "\n" << text.str();
        }
    } catch (const Failure& f) {
        std::cerr << "error: " << kp_status_name(f.status) << ": " << f.message << "\n";
        return exit_code(f.status);
    }
    return kExitOk;
}
