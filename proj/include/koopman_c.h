#ifndef KOOPMAN_C_H
#define KOOPMAN_C_H

/*
 * C interface to the koopman library.
 *
 * Every function returns a kp_status. On failure the message is available
 * from kp_last_error() on the same thread until the next call. Strings
 * returned through char** out-parameters are owned by the caller and must
 * be released with kp_string_free. Handles are released with their
 * matching *_free function; passing NULL to any *_free is a no-op.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(KP_BUILDING_LIBRARY)
#define KP_API __declspec(dllexport)
#else
#define KP_API __declspec(dllimport)
#endif
#else
#define KP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kp_status {
    KP_OK = 0,
    KP_ERR_INVALID_ARGUMENT = 1,
    KP_ERR_PARSE = 2,
    KP_ERR_EVAL = 3,
    KP_ERR_NUMERICAL = 4,
    KP_ERR_IO = 5,
    KP_ERR_INTERNAL = 6
} kp_status;

typedef struct kp_config kp_config;
typedef struct kp_system kp_system;
typedef struct kp_lifted kp_lifted;
typedef struct kp_model kp_model;

KP_API const char* kp_version(void);
KP_API const char* kp_last_error(void);
KP_API const char* kp_status_name(kp_status status);
KP_API void kp_string_free(char* s);

/* Experiment configuration. */
KP_API kp_status kp_config_default(kp_config** out);
KP_API kp_status kp_config_load(const char* path, kp_config** out);
/* Applies "key = value" lines on top of the current values. */
KP_API kp_status kp_config_apply(kp_config* cfg, const char* text);
KP_API kp_status kp_config_to_string(const kp_config* cfg, char** out);
KP_API void kp_config_free(kp_config* cfg);

/* ODE systems. */
KP_API kp_status kp_system_parse(const char* text, kp_system** out);
KP_API kp_status kp_system_load(const char* path, kp_system** out);
/* The shifted machine model built from the network data in cfg. */
KP_API kp_status kp_system_smib(const kp_config* cfg, kp_system** out);
KP_API kp_status kp_system_dimension(const kp_system* sys, size_t* n);
KP_API kp_status kp_system_to_string(const kp_system* sys, char** out);
KP_API void kp_system_free(kp_system* sys);
/* Eigenvalues of the Jacobian at x_star; arrays hold n values. */
KP_API kp_status kp_system_linearize(const kp_system* sys, const double* x_star, size_t n, double* re, double* im);

/* Derived machine constants and the linearized mode, as key = value text. */
KP_API kp_status kp_smib_report(const kp_config* cfg, char** out);

/* Polynomial lifting and the dictionary derived from it. */
KP_API kp_status kp_lift(const kp_system* sys, int max_rounds, kp_lifted** out);
KP_API kp_status kp_lifted_aux_count(const kp_lifted* ls, size_t* count);
KP_API kp_status kp_lifted_dictionary_size(const kp_lifted* ls, size_t* q);
KP_API kp_status kp_lifted_to_string(const kp_lifted* ls, char** out);
KP_API void kp_lifted_free(kp_lifted* ls);

/* RK4 simulation. `out` receives (steps + 1) * n values, row-major. */
KP_API kp_status kp_simulate(const kp_system* sys, const double* x0, size_t n, double dt, int steps, int substeps,
                             double* out);
/* The same trajectory as CSV with header t,x1,...,xn. */
KP_API kp_status kp_simulate_csv(const kp_system* sys, const double* x0, size_t n, double dt, int steps,
                                 int substeps, char** csv);

/*
 * EDMD model trained on the lattice of cfg. `sys` may be NULL for the
 * machine model. `dictionary` is "lie", "p<degree>" or "rbf<size>".
 */
KP_API kp_status kp_model_train(const kp_config* cfg, const kp_system* sys, const char* dictionary,
                                kp_model** out);
KP_API kp_status kp_model_save(const kp_model* model, char** document);
KP_API kp_status kp_model_load(const char* document, kp_model** out);
KP_API kp_status kp_model_size(const kp_model* model, size_t* n, size_t* q);
/* Continuous-time eigenvalues in spectrum order; arrays hold q values. */
KP_API kp_status kp_model_eigenvalues(const kp_model* model, double* re, double* im, size_t q);
/* Principal pair nearest to (ref_re, ref_im), upper half-plane member. */
KP_API kp_status kp_model_principal(const kp_model* model, double ref_re, double ref_im, double* re, double* im);
KP_API kp_status kp_model_spectrum_csv(const kp_model* model, double ref_re, double ref_im, char** csv);
/* `out` receives (steps + 1) * n values; max_imag may be NULL. */
KP_API kp_status kp_model_predict(const kp_model* model, const double* x0, size_t n, int steps, double* out,
                                  double* max_imag);
KP_API kp_status kp_model_predict_csv(const kp_model* model, const double* x0, size_t n, int steps, char** csv);
KP_API void kp_model_free(kp_model* model);

/*
 * Kalman filter run of the machine model from x0 with the noise settings
 * of cfg. stats receives max eps_delta, max eps_omega, sum eps_delta,
 * sum eps_omega; csv may be NULL.
 */
KP_API kp_status kp_kkf_run(const kp_config* cfg, const kp_model* model, const double* x0, size_t n,
                            uint64_t seed, double stats[4], char** csv);

/* Benchmarks write their CSV files to out_dir and return the main table. */
KP_API kp_status kp_bench_spectrum(const kp_config* cfg, const char* out_dir, char** table);
KP_API kp_status kp_bench_kkf(const kp_config* cfg, const char* out_dir, char** table);
KP_API kp_status kp_bench_reconstruct(const kp_config* cfg, const char* out_dir, char** table);

#ifdef __cplusplus
}
#endif

#endif
