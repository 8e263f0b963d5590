#ifndef HSU_HSU_H
#define HSU_HSU_H

#include <stddef.h>
#include <stdint.h>

#if defined(HSU_BUILDING_LIBRARY)
#define HSU_API __attribute__((visibility("default")))
#else
#define HSU_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hsu_status {
  HSU_OK = 0,
  HSU_E_INVALID_INPUT = 1,
  HSU_E_DOMAIN = 2,
  HSU_E_NUMERIC = 3,
  HSU_E_GEOMETRY = 4,
  HSU_E_STATE = 5,
  HSU_E_CONFIG = 6,
  HSU_E_CLASSIFICATION = 7,
  HSU_E_EFFICIENCY = 8,
  HSU_E_CONSISTENCY = 9,
  HSU_E_BUDGET = 10,
  HSU_E_DEPENDENCY = 11,
  HSU_E_DEGENERATE = 12,
  HSU_E_PRECISION = 13,
  HSU_E_IO = 14,
  HSU_E_NULL = 15,     /* a required pointer argument was NULL */
  HSU_E_INTERNAL = 16  /* unexpected exception */
} hsu_status;

typedef struct hsu_body hsu_body;
typedef struct hsu_model hsu_model;
typedef struct hsu_cloud hsu_cloud;
typedef struct hsu_kernel hsu_kernel;
typedef struct hsu_plan hsu_plan;
typedef struct hsu_result hsu_result;

/* Message of the last failing call on this thread; never NULL. */
HSU_API const char* hsu_last_error(void);
HSU_API const char* hsu_status_name(int status);
HSU_API const char* hsu_version(void);

/* Bodies. spec: "ball", "ball:r=2", "lp:4:r=1", "lp:4:diag=1.5,0.75", "egg2d", "table:<csv>". */
HSU_API int hsu_body_create(const char* spec, int dim, hsu_body** out);
HSU_API int hsu_body_create_callback(int dim, double (*gauge)(const double* x, void* user), void* user,
                                     hsu_body** out);
HSU_API void hsu_body_free(hsu_body* body);
HSU_API int hsu_body_dim(const hsu_body* body);
HSU_API int hsu_body_gauge(const hsu_body* body, const double* x, double* out);
HSU_API int hsu_body_volume(const hsu_body* body, double* out);
/* point receives dim coordinates of p(theta); theta need not be unit. */
HSU_API int hsu_body_support(const hsu_body* body, const double* theta, double* zeta, double* point);
/* A receives dim*dim entries, row-major; z = |det A|. */
HSU_API int hsu_body_frame(const hsu_body* body, const double* theta, double* A, double* z);

/* Models. generator_json: {"kind":"light","psi":"t"} or {"kind":"heavy","alpha":5}. */
HSU_API int hsu_model_create(const hsu_body* body, const char* generator_json, hsu_model** out);
HSU_API void hsu_model_free(hsu_model* model);
HSU_API int hsu_model_density(const hsu_model* model, const double* x, double* out);
HSU_API int hsu_model_potter(const hsu_model* model, double epsilon, int* pass, double* t0);

/* Point clouds. */
HSU_API int hsu_cloud_create(int dim, const double* coords, size_t count, hsu_cloud** out);
HSU_API int hsu_sample_poisson(const hsu_model* model, double n, uint64_t seed, uint64_t stream, hsu_cloud** out);
/* Intensity n f conditioned on the halfspace t H(theta). */
HSU_API int hsu_sample_conditional(const hsu_model* model, double n, const double* theta, double t, uint64_t seed,
                                   uint64_t stream, hsu_cloud** out);
HSU_API int hsu_cloud_restrict(const hsu_cloud* cloud, const hsu_body* body, const double* theta, double t,
                               hsu_cloud** out);
HSU_API void hsu_cloud_free(hsu_cloud* cloud);
HSU_API size_t hsu_cloud_size(const hsu_cloud* cloud);
HSU_API int hsu_cloud_dim(const hsu_cloud* cloud);
/* size()*dim() doubles, row-major; valid until the cloud is freed. */
HSU_API const double* hsu_cloud_coords(const hsu_cloud* cloud);

/* Kernels. kernel_json: {"kind":"edge"}, {"kind":"vr","k":2}, {"kind":"noninduced","adjacency":[[0,1],[1,2]]}, ... */
HSU_API int hsu_kernel_create(const char* kernel_json, hsu_kernel** out);
HSU_API void hsu_kernel_free(hsu_kernel* kernel);
HSU_API int hsu_kernel_order(const hsu_kernel* kernel);
/* points: (k+1)*dim doubles, row-major. */
HSU_API int hsu_kernel_eval(const hsu_kernel* kernel, const double* points, int dim, double r, double* out);
/* budget 0 means the default tuple budget. */
HSU_API int hsu_ustat(const hsu_cloud* cloud, const hsu_kernel* kernel, double r, uint64_t budget, int threads,
                      double* value, uint64_t* tuples);
HSU_API int hsu_ustat_bruteforce(const hsu_cloud* cloud, const hsu_kernel* kernel, double r, double* value);

/* Experiment plans. study may be NULL (use the config's), seed and threads may be NULL (no override).
   "verify" and "moments" name the same study. */
HSU_API int hsu_plan_parse(const char* text, const char* source, const char* study, const uint64_t* seed,
                           const int* threads, hsu_plan** out);
HSU_API int hsu_plan_load(const char* path, const char* study, const uint64_t* seed, const int* threads,
                          hsu_plan** out);
HSU_API void hsu_plan_free(hsu_plan* plan);
HSU_API const char* hsu_plan_study(const hsu_plan* plan);

HSU_API int hsu_plan_run(const hsu_plan* plan, hsu_result** out);
HSU_API int hsu_result_write(const hsu_result* result, const hsu_plan* plan, const char* out_dir);
/* Report as JSON text; valid until the result is freed. */
HSU_API const char* hsu_result_report(const hsu_result* result);
HSU_API int hsu_result_precision_failure(const hsu_result* result);
HSU_API size_t hsu_result_warning_count(const hsu_result* result);
HSU_API const char* hsu_result_warning(const hsu_result* result, size_t i);
HSU_API void hsu_result_free(hsu_result* result);

#ifdef __cplusplus
}
#endif

#endif
