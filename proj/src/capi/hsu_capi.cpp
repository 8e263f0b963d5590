#include "hsu/hsu.h"

#include <cmath>
#include <exception>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "hsu/config.hpp"
#include "hsu/errors.hpp"
#include "hsu/harness.hpp"

using nlohmann::json;

struct hsu_body {
  hsu::BodyPtr body;
};
struct hsu_model {
  std::shared_ptr<hsu::DensityModel> model;
};
struct hsu_cloud {
  hsu::PointCloud cloud;
};
struct hsu_kernel {
  hsu::KernelPtr kernel;
};
struct hsu_plan {
  hsu::ExperimentPlan plan;
};
struct hsu_result {
  hsu::StudyResult result;
  std::string report;
};

namespace {

thread_local std::string last_error;

int code_of(hsu::ErrorKind k) {
  using hsu::ErrorKind;
  switch (k) {
    case ErrorKind::InvalidInput: return HSU_E_INVALID_INPUT;
    case ErrorKind::Domain: return HSU_E_DOMAIN;
    case ErrorKind::Numeric: return HSU_E_NUMERIC;
    case ErrorKind::Geometry: return HSU_E_GEOMETRY;
    case ErrorKind::State: return HSU_E_STATE;
    case ErrorKind::Config: return HSU_E_CONFIG;
    case ErrorKind::Classification: return HSU_E_CLASSIFICATION;
    case ErrorKind::Efficiency: return HSU_E_EFFICIENCY;
    case ErrorKind::Consistency: return HSU_E_CONSISTENCY;
    case ErrorKind::Budget: return HSU_E_BUDGET;
    case ErrorKind::Dependency: return HSU_E_DEPENDENCY;
    case ErrorKind::Degenerate: return HSU_E_DEGENERATE;
    case ErrorKind::Precision: return HSU_E_PRECISION;
    case ErrorKind::Io: return HSU_E_IO;
  }
  return HSU_E_INTERNAL;
}

template <class F>
int guarded(F&& fn) {
  try {
    fn();
    return HSU_OK;
  } catch (const hsu::Error& e) {
    last_error = e.what();
    return code_of(e.kind());
  } catch (const json::exception& e) {
    last_error = std::string("invalid JSON: ") + e.what();
    return HSU_E_CONFIG;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return HSU_E_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return HSU_E_INTERNAL;
  } catch (...) {
    last_error = "unknown exception";
    return HSU_E_INTERNAL;
  }
}

#define HSU_REQUIRE(p)                                   \
  do {                                                   \
    if (!(p)) {                                          \
      last_error = "null argument: " #p;                 \
      return HSU_E_NULL;                                 \
    }                                                    \
  } while (0)

hsu::Vec vec_of(const double* x, int d) { return Eigen::Map<const hsu::Vec>(x, d); }

// Directions from C callers need not be unit vectors.
hsu::Vec direction_of(const double* x, int d) {
  const hsu::Vec v = vec_of(x, d);
  const double len = v.norm();
  if (!(len > 0.0) || !std::isfinite(len)) hsu::fail(hsu::ErrorKind::InvalidInput, "direction must be nonzero and finite");
  return v / len;
}

std::string canonical_study(std::string s) { return s == "verify" ? "moments" : s; }

hsu::ExperimentPlan parse_with_overrides(const std::string& text, const std::string& source, const char* study,
                                         const std::uint64_t* seed, const int* threads) {
  if (!study && !seed && !threads) return hsu::parse_plan(text, source);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    return hsu::parse_plan(text, source);  // reports line and column
  }
  if (!j.is_object()) return hsu::parse_plan(text, source);
  if (study) {
    if (j.contains("study") && j["study"].is_string() &&
        canonical_study(j["study"].get<std::string>()) != canonical_study(study))
      hsu::fail(hsu::ErrorKind::Config, source + ": field 'study': config is for '" + j["study"].get<std::string>() +
                                            "' but the command is '" + study + "'");
    j["study"] = study;
  }
  if (seed) j["seed"] = *seed;
  if (threads) j["threads"] = *threads;
  return hsu::parse_plan(j.dump(2), source);
}

}  // namespace

extern "C" {

const char* hsu_last_error(void) { return last_error.c_str(); }

const char* hsu_status_name(int status) {
  switch (status) {
    case HSU_OK: return "ok";
    case HSU_E_INVALID_INPUT: return "invalid input";
    case HSU_E_DOMAIN: return "domain error";
    case HSU_E_NUMERIC: return "numeric failure";
    case HSU_E_GEOMETRY: return "geometry error";
    case HSU_E_STATE: return "invalid state";
    case HSU_E_CONFIG: return "config error";
    case HSU_E_CLASSIFICATION: return "classification error";
    case HSU_E_EFFICIENCY: return "efficiency error";
    case HSU_E_CONSISTENCY: return "consistency error";
    case HSU_E_BUDGET: return "budget exceeded";
    case HSU_E_DEPENDENCY: return "dependency error";
    case HSU_E_DEGENERATE: return "degenerate";
    case HSU_E_PRECISION: return "precision failure";
    case HSU_E_IO: return "i/o error";
    case HSU_E_NULL: return "null argument";
    case HSU_E_INTERNAL: return "internal error";
    default: return "unknown status";
  }
}

const char* hsu_version(void) { return hsu::kVersion; }

// Bodies

int hsu_body_create(const char* spec, int dim, hsu_body** out) {
  HSU_REQUIRE(spec);
  HSU_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new hsu_body{hsu::make_body(spec, dim)}; });
}

int hsu_body_create_callback(int dim, double (*gauge)(const double*, void*), void* user, hsu_body** out) {
  HSU_REQUIRE(gauge);
  HSU_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new hsu_body{std::make_shared<hsu::CallbackBody>(dim, gauge, user)}; });
}

void hsu_body_free(hsu_body* body) { delete body; }

int hsu_body_dim(const hsu_body* body) { return body ? body->body->dim() : 0; }

int hsu_body_gauge(const hsu_body* body, const double* x, double* out) {
  HSU_REQUIRE(body);
  HSU_REQUIRE(x);
  HSU_REQUIRE(out);
  return guarded([&] { *out = body->body->gauge(vec_of(x, body->body->dim())); });
}

int hsu_body_volume(const hsu_body* body, double* out) {
  HSU_REQUIRE(body);
  HSU_REQUIRE(out);
  return guarded([&] { *out = body->body->volume(); });
}

int hsu_body_support(const hsu_body* body, const double* theta, double* zeta, double* point) {
  HSU_REQUIRE(body);
  HSU_REQUIRE(theta);
  return guarded([&] {
    const int d = body->body->dim();
    const hsu::SupportResult s = hsu::support(*body->body, direction_of(theta, d));
    if (zeta) *zeta = s.zeta;
    if (point)
      for (int i = 0; i < d; ++i) point[i] = s.point[i];
  });
}

int hsu_body_frame(const hsu_body* body, const double* theta, double* A, double* z) {
  HSU_REQUIRE(body);
  HSU_REQUIRE(theta);
  return guarded([&] {
    const int d = body->body->dim();
    const hsu::AffineFrame f = hsu::initial_transformation(*body->body, direction_of(theta, d));
    if (A)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A[i * d + j] = f.A(i, j);
    if (z) *z = f.z;
  });
}

// Models

int hsu_model_create(const hsu_body* body, const char* generator_json, hsu_model** out) {
  HSU_REQUIRE(body);
  HSU_REQUIRE(generator_json);
  HSU_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const hsu::GeneratorSpec g = hsu::parse_generator(json::parse(generator_json), "model");
    *out = new hsu_model{std::make_shared<hsu::DensityModel>(body->body, g)};
  });
}

void hsu_model_free(hsu_model* model) { delete model; }

int hsu_model_density(const hsu_model* model, const double* x, double* out) {
  HSU_REQUIRE(model);
  HSU_REQUIRE(x);
  HSU_REQUIRE(out);
  return guarded([&] { *out = model->model->density(vec_of(x, model->model->dim())); });
}

int hsu_model_potter(const hsu_model* model, double epsilon, int* pass, double* t0) {
  HSU_REQUIRE(model);
  return guarded([&] {
    const hsu::PotterReport rep = hsu::potter_check(*model->model, epsilon);
    if (pass) *pass = rep.pass ? 1 : 0;
    if (t0) *t0 = rep.t0.value_or(-1.0);
  });
}

// Clouds

int hsu_cloud_create(int dim, const double* coords, size_t count, hsu_cloud** out) {
  HSU_REQUIRE(out);
  *out = nullptr;
  if (count > 0) HSU_REQUIRE(coords);
  return guarded([&] {
    if (dim < 1) hsu::fail(hsu::ErrorKind::InvalidInput, "cloud dimension must be positive");
    auto* c = new hsu_cloud;
    c->cloud.dim = dim;
    c->cloud.coords.assign(coords, coords + count * static_cast<std::size_t>(dim));
    c->cloud.meta.parent = "user";
    *out = c;
  });
}

int hsu_sample_poisson(const hsu_model* model, double n, uint64_t seed, uint64_t stream, hsu_cloud** out) {
  HSU_REQUIRE(model);
  HSU_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new hsu_cloud{hsu::sample_poisson(*model->model, n, seed, stream)}; });
}

int hsu_sample_conditional(const hsu_model* model, double n, const double* theta, double t, uint64_t seed,
                           uint64_t stream, hsu_cloud** out) {
  HSU_REQUIRE(model);
  HSU_REQUIRE(theta);
  HSU_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const hsu::Halfspace hs = hsu::outer_halfspace(model->model->body(), direction_of(theta, model->model->dim()), t);
    *out = new hsu_cloud{hsu::sample_conditional(*model->model, n, hs, seed, stream)};
  });
}

int hsu_cloud_restrict(const hsu_cloud* cloud, const hsu_body* body, const double* theta, double t,
                       hsu_cloud** out) {
  HSU_REQUIRE(cloud);
  HSU_REQUIRE(body);
  HSU_REQUIRE(theta);
  HSU_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    if (cloud->cloud.dim != body->body->dim()) hsu::fail(hsu::ErrorKind::InvalidInput, "cloud and body dimensions differ");
    const hsu::Halfspace hs = hsu::outer_halfspace(*body->body, direction_of(theta, body->body->dim()), t);
    *out = new hsu_cloud{hsu::restrict_cloud(cloud->cloud, hs)};
  });
}

void hsu_cloud_free(hsu_cloud* cloud) { delete cloud; }
size_t hsu_cloud_size(const hsu_cloud* cloud) { return cloud ? cloud->cloud.size() : 0; }
int hsu_cloud_dim(const hsu_cloud* cloud) { return cloud ? cloud->cloud.dim : 0; }
const double* hsu_cloud_coords(const hsu_cloud* cloud) { return cloud ? cloud->cloud.coords.data() : nullptr; }

// Kernels

int hsu_kernel_create(const char* kernel_json, hsu_kernel** out) {
  HSU_REQUIRE(kernel_json);
  HSU_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new hsu_kernel{hsu::make_kernel(hsu::parse_kernel(json::parse(kernel_json), "kernel"))}; });
}

void hsu_kernel_free(hsu_kernel* kernel) { delete kernel; }
int hsu_kernel_order(const hsu_kernel* kernel) { return kernel ? kernel->kernel->order() : 0; }

int hsu_kernel_eval(const hsu_kernel* kernel, const double* points, int dim, double r, double* out) {
  HSU_REQUIRE(kernel);
  HSU_REQUIRE(points);
  HSU_REQUIRE(out);
  return guarded([&] {
    if (dim < 1) hsu::fail(hsu::ErrorKind::InvalidInput, "dimension must be positive");
    std::vector<hsu::Vec> tuple;
    for (int i = 0; i <= kernel->kernel->order(); ++i) tuple.push_back(vec_of(points + i * dim, dim));
    *out = kernel->kernel->eval_checked(tuple, r);
  });
}

int hsu_ustat(const hsu_cloud* cloud, const hsu_kernel* kernel, double r, uint64_t budget, int threads,
              double* value, uint64_t* tuples) {
  HSU_REQUIRE(cloud);
  HSU_REQUIRE(kernel);
  HSU_REQUIRE(value);
  return guarded([&] {
    hsu::ComputeOptions opt;
    if (budget) opt.budget = budget;
    opt.threads = threads < 1 ? 1 : threads;
    const hsu::StatisticValue v = hsu::compute_S(cloud->cloud, *kernel->kernel, r, opt);
    *value = v.value;
    if (tuples) *tuples = v.tuples;
  });
}

int hsu_ustat_bruteforce(const hsu_cloud* cloud, const hsu_kernel* kernel, double r, double* value) {
  HSU_REQUIRE(cloud);
  HSU_REQUIRE(kernel);
  HSU_REQUIRE(value);
  return guarded([&] { *value = hsu::compute_S_bruteforce(cloud->cloud, *kernel->kernel, r).value; });
}

// Plans

int hsu_plan_parse(const char* text, const char* source, const char* study, const uint64_t* seed, const int* threads,
                   hsu_plan** out) {
  HSU_REQUIRE(text);
  HSU_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    *out = new hsu_plan{parse_with_overrides(text, source ? source : "<config>", study, seed, threads)};
  });
}

int hsu_plan_load(const char* path, const char* study, const uint64_t* seed, const int* threads, hsu_plan** out) {
  HSU_REQUIRE(path);
  HSU_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    std::ifstream in(path);
    if (!in) hsu::fail(hsu::ErrorKind::Config, std::string("cannot open config '") + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    *out = new hsu_plan{parse_with_overrides(ss.str(), path, study, seed, threads)};
  });
}

void hsu_plan_free(hsu_plan* plan) { delete plan; }
const char* hsu_plan_study(const hsu_plan* plan) { return plan ? plan->plan.study.c_str() : ""; }

int hsu_plan_run(const hsu_plan* plan, hsu_result** out) {
  HSU_REQUIRE(plan);
  HSU_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto* r = new hsu_result;
    try {
      r->result = hsu::run_study(plan->plan);
      r->report = r->result.report.dump(2);
    } catch (...) {
      delete r;
      throw;
    }
    *out = r;
  });
}

int hsu_result_write(const hsu_result* result, const hsu_plan* plan, const char* out_dir) {
  HSU_REQUIRE(result);
  HSU_REQUIRE(plan);
  HSU_REQUIRE(out_dir);
  return guarded([&] { hsu::write_artifacts(result->result, plan->plan, out_dir); });
}

const char* hsu_result_report(const hsu_result* result) { return result ? result->report.c_str() : ""; }
int hsu_result_precision_failure(const hsu_result* result) {
  return result && result->result.precision_failure ? 1 : 0;
}
size_t hsu_result_warning_count(const hsu_result* result) { return result ? result->result.warnings.size() : 0; }
const char* hsu_result_warning(const hsu_result* result, size_t i) {
  if (!result || i >= result->result.warnings.size()) return "";
  return result->result.warnings[i].c_str();
}
void hsu_result_free(hsu_result* result) { delete result; }

}  // extern "C"
