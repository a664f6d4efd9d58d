#include "koopman_c.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <sstream>
#include <string>

#include "koopman/bench.hpp"
#include "koopman/config.hpp"
#include "koopman/error.hpp"

using namespace koopman;

struct kp_config {
    ExperimentConfig cfg;
};

struct kp_system {
    OdeSystem sys;
};

struct kp_lifted {
    LiftedSystem lifted;
    ObservableSet observables;
};

struct kp_model {
    KoopmanDecomposition dec;
};

namespace {

thread_local std::string g_last_error;

template <class Fn>
kp_status guarded(Fn&& fn) {
    g_last_error.clear();
    try {
        fn();
        return KP_OK;
    } catch (const ParseError& e) {
        g_last_error = e.what();
        return KP_ERR_PARSE;
    } catch (const EvalError& e) {
        g_last_error = e.what();
        return KP_ERR_EVAL;
    } catch (const NumericalError& e) {
        g_last_error = e.what();
        return KP_ERR_NUMERICAL;
    } catch (const InvalidArgument& e) {
        g_last_error = e.what();
        return KP_ERR_INVALID_ARGUMENT;
    } catch (const IoError& e) {
        g_last_error = e.what();
        return KP_ERR_IO;
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return KP_ERR_IO;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return KP_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return KP_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return KP_ERR_INTERNAL;
    }
}

template <class T>
void require(const T* p, const char* what) {
    if (!p) throw InvalidArgument(std::string(what) + " is null");
}

char* dup(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

void copy_trajectory(const Trajectory& t, double* out) {
    for (Eigen::Index k = 0; k < t.samples(); ++k) {
        for (Eigen::Index j = 0; j < t.dimension(); ++j) out[k * t.dimension() + j] = t.states(k, j);
    }
}

std::string trajectory_csv(const Trajectory& t) {
    std::ostringstream os;
    write_trajectory_csv(os, t);
    return os.str();
}

std::string report(const ExperimentConfig& cfg) {
    SmibModel m = smib_build(cfg.smib);
    const SmibDerived& d = m.derived;
    const std::vector<double> origin(2, 0.0);
    LinearizationResult lin = jacobian_eigs(m.system, origin);
    std::ostringstream os;
    os.precision(10);
    os << "theta1 = " << d.theta1 << "\n"
       << "I = " << std::abs(d.I) << " @ " << std::arg(d.I) << "\n"
       << "E = " << d.E_mag << " @ " << d.delta0 << "\n"
       << "delta0 = " << d.delta0 << "\n"
       << "G_eq = " << d.G_eq << "\nB_eq = " << d.B_eq << "\n"
       << "k1 = " << d.k1 << "\nk2 = " << d.k2 << "\nk3 = " << d.k3 << "\n"
       << "c2 = " << d.c2 << "\nc3 = " << d.c3 << "\n"
       << "ws = " << d.ws << "\nM = " << d.M << "\n";
    for (const auto& mode : lin.modes) {
        os << "lambda = " << mode.lambda.real() << " +- j" << mode.lambda.imag() << "\n"
           << "freq_hz = " << mode.freq_hz << "\n"
           << "damping_pct = " << 100.0 * mode.damping << "\n";
    }
    return os.str();
}

}  // namespace

extern "C" {

const char* kp_version(void) { return "1.0.0"; }

const char* kp_last_error(void) { return g_last_error.c_str(); }

const char* kp_status_name(kp_status status) {
    switch (status) {
        case KP_OK:
            return "ok";
        case KP_ERR_INVALID_ARGUMENT:
            return "invalid argument";
        case KP_ERR_PARSE:
            return "parse error";
        case KP_ERR_EVAL:
            return "evaluation error";
        case KP_ERR_NUMERICAL:
            return "numerical failure";
        case KP_ERR_IO:
            return "i/o error";
        case KP_ERR_INTERNAL:
            return "internal error";
    }
    return "unknown status";
}

void kp_string_free(char* s) { std::free(s); }

kp_status kp_config_default(kp_config** out) {
    return guarded([&] {
        require(out, "out");
        *out = new kp_config{};
    });
}

kp_status kp_config_load(const char* path, kp_config** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new kp_config{load_config(path)};
    });
}

kp_status kp_config_apply(kp_config* cfg, const char* text) {
    return guarded([&] {
        require(cfg, "config");
        require(text, "text");
        cfg->cfg = parse_config(text, cfg->cfg);
    });
}

kp_status kp_config_to_string(const kp_config* cfg, char** out) {
    return guarded([&] {
        require(cfg, "config");
        require(out, "out");
        *out = dup(format_config(cfg->cfg));
    });
}

void kp_config_free(kp_config* cfg) { delete cfg; }

kp_status kp_system_parse(const char* text, kp_system** out) {
    return guarded([&] {
        require(text, "text");
        require(out, "out");
        *out = new kp_system{parse_system(text)};
    });
}

kp_status kp_system_load(const char* path, kp_system** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new kp_system{load_system(path)};
    });
}

kp_status kp_system_smib(const kp_config* cfg, kp_system** out) {
    return guarded([&] {
        require(cfg, "config");
        require(out, "out");
        *out = new kp_system{smib_build(cfg->cfg.smib).system};
    });
}

kp_status kp_system_dimension(const kp_system* sys, size_t* n) {
    return guarded([&] {
        require(sys, "system");
        require(n, "n");
        *n = sys->sys.dimension();
    });
}

kp_status kp_system_to_string(const kp_system* sys, char** out) {
    return guarded([&] {
        require(sys, "system");
        require(out, "out");
        *out = dup(format_system(sys->sys));
    });
}

void kp_system_free(kp_system* sys) { delete sys; }

kp_status kp_system_linearize(const kp_system* sys, const double* x_star, size_t n, double* re, double* im) {
    return guarded([&] {
        require(sys, "system");
        require(x_star, "x_star");
        require(re, "re");
        require(im, "im");
        if (n != sys->sys.dimension()) throw InvalidArgument("x_star has the wrong dimension");
        LinearizationResult lin = jacobian_eigs(sys->sys, std::span<const double>(x_star, n));
        for (std::size_t i = 0; i < lin.eigenvalues.size(); ++i) {
            re[i] = lin.eigenvalues[i].real();
            im[i] = lin.eigenvalues[i].imag();
        }
    });
}

kp_status kp_smib_report(const kp_config* cfg, char** out) {
    return guarded([&] {
        require(cfg, "config");
        require(out, "out");
        *out = dup(report(cfg->cfg));
    });
}

kp_status kp_lift(const kp_system* sys, int max_rounds, kp_lifted** out) {
    return guarded([&] {
        require(sys, "system");
        require(out, "out");
        LiftedSystem ls = lift(sys->sys, max_rounds);
        ObservableSet obs = observables_from_lift(ls);
        *out = new kp_lifted{std::move(ls), std::move(obs)};
    });
}

kp_status kp_lifted_aux_count(const kp_lifted* ls, size_t* count) {
    return guarded([&] {
        require(ls, "lifted system");
        require(count, "count");
        *count = ls->lifted.aux.size();
    });
}

kp_status kp_lifted_dictionary_size(const kp_lifted* ls, size_t* q) {
    return guarded([&] {
        require(ls, "lifted system");
        require(q, "q");
        *q = ls->observables.q();
    });
}

kp_status kp_lifted_to_string(const kp_lifted* ls, char** out) {
    return guarded([&] {
        require(ls, "lifted system");
        require(out, "out");
        *out = dup(format_lift(ls->lifted, ls->observables));
    });
}

void kp_lifted_free(kp_lifted* ls) { delete ls; }

kp_status kp_simulate(const kp_system* sys, const double* x0, size_t n, double dt, int steps, int substeps,
                      double* out) {
    return guarded([&] {
        require(sys, "system");
        require(x0, "x0");
        require(out, "out");
        copy_trajectory(integrate_rk4(sys->sys, std::span<const double>(x0, n), dt, steps, substeps), out);
    });
}

kp_status kp_simulate_csv(const kp_system* sys, const double* x0, size_t n, double dt, int steps, int substeps,
                          char** csv) {
    return guarded([&] {
        require(sys, "system");
        require(x0, "x0");
        require(csv, "csv");
        *csv = dup(trajectory_csv(integrate_rk4(sys->sys, std::span<const double>(x0, n), dt, steps, substeps)));
    });
}

kp_status kp_model_train(const kp_config* cfg, const kp_system* sys, const char* dictionary, kp_model** out) {
    return guarded([&] {
        require(cfg, "config");
        require(dictionary, "dictionary");
        require(out, "out");
        const ExperimentConfig& c = cfg->cfg;
        const OdeSystem system = sys ? sys->sys : smib_build(c.smib).system;
        if (c.lattice.axes.size() != system.dimension()) {
            throw InvalidArgument("training lattice has " + std::to_string(c.lattice.axes.size()) +
                                  " axes but the system has " + std::to_string(system.dimension()) + " states");
        }
        auto trajs = integrate_many(system, sample_lattice(c.lattice), c.dt, c.training_steps(), c.substeps,
                                    c.threads);
        SnapshotPair snaps = build_snapshots(trajs);
        ObservableSet obs = make_dictionary(c, dictionary, system);
        FitResult f = fit(apply_dictionary(obs, snaps, c.threads), c.sv_rel_tol);
        *out = new kp_model{decompose(f.K, obs, snaps.dt)};
    });
}

kp_status kp_model_save(const kp_model* model, char** document) {
    return guarded([&] {
        require(model, "model");
        require(document, "document");
        *document = dup(save_model(model->dec));
    });
}

kp_status kp_model_load(const char* document, kp_model** out) {
    return guarded([&] {
        require(document, "document");
        require(out, "out");
        *out = new kp_model{load_model(document)};
    });
}

kp_status kp_model_size(const kp_model* model, size_t* n, size_t* q) {
    return guarded([&] {
        require(model, "model");
        if (n) *n = model->dec.dictionary.n();
        if (q) *q = model->dec.dictionary.q();
    });
}

kp_status kp_model_eigenvalues(const kp_model* model, double* re, double* im, size_t q) {
    return guarded([&] {
        require(model, "model");
        require(re, "re");
        require(im, "im");
        const auto& l = model->dec.lambda_c;
        if (q < static_cast<size_t>(l.size())) throw InvalidArgument("output arrays are too small");
        for (Eigen::Index i = 0; i < l.size(); ++i) {
            re[i] = l[i].real();
            im[i] = l[i].imag();
        }
    });
}

kp_status kp_model_principal(const kp_model* model, double ref_re, double ref_im, double* re, double* im) {
    return guarded([&] {
        require(model, "model");
        require(re, "re");
        require(im, "im");
        PrincipalPair p = principal_eigenpair(model->dec, {ref_re, ref_im});
        *re = p.lambda.real();
        *im = p.lambda.imag();
    });
}

kp_status kp_model_spectrum_csv(const kp_model* model, double ref_re, double ref_im, char** csv) {
    return guarded([&] {
        require(model, "model");
        require(csv, "csv");
        PrincipalPair p = principal_eigenpair(model->dec, {ref_re, ref_im});
        std::ostringstream os;
        write_spectrum_csv(os, model->dec, p.index);
        *csv = dup(os.str());
    });
}

kp_status kp_model_predict(const kp_model* model, const double* x0, size_t n, int steps, double* out,
                           double* max_imag) {
    return guarded([&] {
        require(model, "model");
        require(x0, "x0");
        require(out, "out");
        if (n != model->dec.dictionary.n()) throw InvalidArgument("x0 has the wrong dimension");
        Prediction p = predict(model->dec, std::span<const double>(x0, n), steps);
        copy_trajectory(p.trajectory, out);
        if (max_imag) *max_imag = p.max_imag;
    });
}

kp_status kp_model_predict_csv(const kp_model* model, const double* x0, size_t n, int steps, char** csv) {
    return guarded([&] {
        require(model, "model");
        require(x0, "x0");
        require(csv, "csv");
        if (n != model->dec.dictionary.n()) throw InvalidArgument("x0 has the wrong dimension");
        *csv = dup(trajectory_csv(predict(model->dec, std::span<const double>(x0, n), steps).trajectory));
    });
}

void kp_model_free(kp_model* model) { delete model; }

kp_status kp_kkf_run(const kp_config* cfg, const kp_model* model, const double* x0, size_t n, uint64_t seed,
                     double stats[4], char** csv) {
    return guarded([&] {
        require(cfg, "config");
        require(model, "model");
        require(x0, "x0");
        require(stats, "stats");
        const ExperimentConfig& c = cfg->cfg;
        SmibModel m = smib_build(c.smib);
        if (n != 2 || model->dec.dictionary.n() != 2) throw InvalidArgument("the filter needs a two-state model");
        const MeasurementModel meas = build_measurement(model->dec, m.derived);
        const NoiseSpec noise =
            NoiseSpec::isotropic(model->dec.dictionary.q(), c.process_noise, c.measurement_noise, c.sigma);
        KkfRunOptions opts;
        opts.duration = c.kkf_duration;
        opts.guess = c.kkf_guess;
        opts.P0_scale = c.P0_scale;
        opts.substeps = c.substeps;
        opts.filter.relift = c.relift;
        opts.filter.relift_covariance = c.relift_covariance;
        KkfRun run = kkf_run(m.system, std::span<const double>(x0, n), model->dec, meas, noise, seed, opts);
        stats[0] = run.stats.max_eps_delta;
        stats[1] = run.stats.max_eps_omega;
        stats[2] = run.stats.sum_eps_delta;
        stats[3] = run.stats.sum_eps_omega;
        if (csv) {
            std::ostringstream os;
            write_kkf_csv(os, run);
            *csv = dup(os.str());
        }
    });
}

kp_status kp_bench_spectrum(const kp_config* cfg, const char* out_dir, char** table) {
    return guarded([&] {
        require(cfg, "config");
        SpectrumBench b = run_spectrum_bench(cfg->cfg);
        write_spectrum_outputs(b, out_dir ? out_dir : cfg->cfg.output_dir);
        if (table) *table = dup(b.table4.to_csv());
    });
}

kp_status kp_bench_kkf(const kp_config* cfg, const char* out_dir, char** table) {
    return guarded([&] {
        require(cfg, "config");
        SpectrumBench s = run_spectrum_bench(cfg->cfg);
        KkfBench b = run_kkf_bench(cfg->cfg, s);
        write_kkf_outputs(b, out_dir ? out_dir : cfg->cfg.output_dir);
        if (table) *table = dup(b.table6.to_csv());
    });
}

kp_status kp_bench_reconstruct(const kp_config* cfg, const char* out_dir, char** table) {
    return guarded([&] {
        require(cfg, "config");
        SpectrumBench s = run_spectrum_bench(cfg->cfg);
        Reconstruction r = run_reconstruction(cfg->cfg, s, cfg->cfg.recon_start);
        write_reconstruction(r, out_dir ? out_dir : cfg->cfg.output_dir);
        if (table) {
            ResultTable t{{"dictionary", "max_abs_delta_error", "file"}, {}};
            for (std::size_t i = 0; i < r.labels.size(); ++i) {
                std::ostringstream v;
                v.precision(17);
                v << r.max_abs_delta_error[i];
                t.rows.push_back({r.labels[i], v.str(), reconstruction_filename(r.start)});
            }
            *table = dup(t.to_csv());
        }
    });
}

}  // extern "C"
