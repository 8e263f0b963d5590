#include <math.h>
#include <stdio.h>
#include <string.h>

#include "hsu/hsu.h"

static const double PI = 3.14159265358979323846;
static int failures = 0;

#define EXPECT(cond)                                                          \
  do {                                                                        \
    if (!(cond)) {                                                            \
      fprintf(stderr, "%s:%d: check failed: %s (%s)\n", __FILE__, __LINE__, #cond, hsu_last_error()); \
      ++failures;                                                             \
    }                                                                         \
  } while (0)

static double square_gauge(const double* x, void* user) {
  (void)user;
  return sqrt(x[0] * x[0] + x[1] * x[1]);
}

static void bodies(void) {
  hsu_body* ball = NULL;
  EXPECT(hsu_body_create("ball", 2, &ball) == HSU_OK);
  EXPECT(hsu_body_dim(ball) == 2);
  const double x[2] = {3, 4};
  double g = 0, vol = 0, zeta = 0, p[2], A[4], z = 0;
  EXPECT(hsu_body_gauge(ball, x, &g) == HSU_OK && fabs(g - 5) < 1e-12);
  EXPECT(hsu_body_volume(ball, &vol) == HSU_OK && fabs(vol - PI) < 1e-6);
  const double theta[2] = {0, 2};
  EXPECT(hsu_body_support(ball, theta, &zeta, p) == HSU_OK && fabs(zeta - 1) < 1e-12 && fabs(p[1] - 1) < 1e-12);
  EXPECT(hsu_body_frame(ball, theta, A, &z) == HSU_OK && z > 0);

  hsu_body* bad = NULL;
  EXPECT(hsu_body_create("blob", 2, &bad) != HSU_OK && bad == NULL);
  EXPECT(strlen(hsu_last_error()) > 0);
  EXPECT(hsu_body_create(NULL, 2, &bad) == HSU_E_NULL);
  EXPECT(hsu_body_gauge(ball, NULL, &g) == HSU_E_NULL);
  const double zero[2] = {0, 0};
  EXPECT(hsu_body_support(ball, zero, &zeta, p) != HSU_OK);

  hsu_body* cb = NULL;
  EXPECT(hsu_body_create_callback(2, square_gauge, NULL, &cb) == HSU_OK);
  EXPECT(hsu_body_gauge(cb, x, &g) == HSU_OK && fabs(g - 5) < 1e-12);
  hsu_body_free(cb);
  hsu_body_free(ball);
  hsu_body_free(NULL);
}

static void sampling_and_ustats(void) {
  hsu_body* ball = NULL;
  hsu_model* model = NULL;
  EXPECT(hsu_body_create("ball", 2, &ball) == HSU_OK);
  EXPECT(hsu_model_create(ball, "{\"kind\":\"light\",\"psi\":\"t\"}", &model) == HSU_OK);
  hsu_model* badm = NULL;
  EXPECT(hsu_model_create(ball, "{\"kind\":\"light\",\"psi\":\"t^3\"}", &badm) == HSU_E_CONFIG);
  EXPECT(hsu_model_create(ball, "{\"kind\":", &badm) == HSU_E_CONFIG);

  const double origin[2] = {0, 0};
  double f = 0;
  EXPECT(hsu_model_density(model, origin, &f) == HSU_OK && fabs(f - 1 / (2 * PI)) < 1e-9);
  int pass = 1;
  double t0 = 0;
  EXPECT(hsu_model_potter(model, 0.1, &pass, &t0) != HSU_OK);

  hsu_cloud *a = NULL, *b = NULL;
  EXPECT(hsu_sample_poisson(model, 2000, 7, 0, &a) == HSU_OK);
  EXPECT(hsu_sample_poisson(model, 2000, 7, 0, &b) == HSU_OK);
  EXPECT(hsu_cloud_size(a) == hsu_cloud_size(b) && hsu_cloud_size(a) > 1500);
  EXPECT(memcmp(hsu_cloud_coords(a), hsu_cloud_coords(b), hsu_cloud_size(a) * 2 * sizeof(double)) == 0);
  EXPECT(hsu_sample_poisson(model, -1, 7, 0, &b) != HSU_OK);

  const double up[2] = {0, 1};
  hsu_cloud* top = NULL;
  EXPECT(hsu_cloud_restrict(a, ball, up, 1.5, &top) == HSU_OK);
  const double* c = hsu_cloud_coords(top);
  for (size_t i = 0; i < hsu_cloud_size(top); ++i) EXPECT(c[2 * i + 1] >= 1.5);

  hsu_kernel *edge = NULL, *tri = NULL, *badk = NULL;
  EXPECT(hsu_kernel_create("{\"kind\":\"edge\"}", &edge) == HSU_OK);
  EXPECT(hsu_kernel_create("{\"kind\":\"vr\",\"k\":2}", &tri) == HSU_OK);
  EXPECT(hsu_kernel_order(tri) == 2);
  EXPECT(hsu_kernel_create("{\"kind\":\"noninduced\",\"adjacency\":[[0,1],[2,3]]}", &badk) != HSU_OK);
  const double pts[4] = {0, 0, 0.6, 0.8};
  double h = -1;
  EXPECT(hsu_kernel_eval(edge, pts, 2, 1.0, &h) == HSU_OK && h == 1.0);
  EXPECT(hsu_kernel_eval(edge, pts, 2, 0.9, &h) == HSU_OK && h == 0.0);

  hsu_cloud* small = NULL;
  const double sc[10] = {0, 0, 0.5, 0, 0, 0.5, 3, 3, 3.2, 3};
  EXPECT(hsu_cloud_create(2, sc, 5, &small) == HSU_OK);
  double s = 0, brute = 0;
  uint64_t tuples = 0;
  EXPECT(hsu_ustat(small, edge, 0.6, 0, 1, &s, &tuples) == HSU_OK && s == 3.0);
  EXPECT(hsu_ustat(small, tri, 0.75, 0, 1, &s, &tuples) == HSU_OK && s == 1.0);
  EXPECT(hsu_ustat_bruteforce(small, tri, 0.75, &brute) == HSU_OK && brute == s);
  double s1 = 0;
  EXPECT(hsu_ustat(top, edge, 0.5, 0, 1, &s1, &tuples) == HSU_OK);
  EXPECT(hsu_ustat(top, edge, 0.5, 0, 2, &s, &tuples) == HSU_OK && s == s1);
  EXPECT(hsu_ustat_bruteforce(a, edge, 0.5, &brute) != HSU_OK);
  EXPECT(hsu_ustat(a, tri, 0.5, 10, 1, &s, &tuples) == HSU_E_BUDGET);

  hsu_cloud* cond = NULL;
  EXPECT(hsu_sample_conditional(model, 100, up, 3, 1, 2, &cond) == HSU_OK);
  c = hsu_cloud_coords(cond);
  for (size_t i = 0; i < hsu_cloud_size(cond); ++i) EXPECT(c[2 * i + 1] >= 3);

  hsu_cloud_free(cond);
  hsu_cloud_free(small);
  hsu_kernel_free(tri);
  hsu_kernel_free(edge);
  hsu_cloud_free(top);
  hsu_cloud_free(b);
  hsu_cloud_free(a);
  hsu_model_free(model);

  hsu_model* heavy = NULL;
  EXPECT(hsu_model_create(ball, "{\"kind\":\"heavy\",\"alpha\":5,\"profile\":\"pareto\"}", &heavy) == HSU_OK);
  EXPECT(hsu_model_potter(heavy, 0.1, &pass, &t0) == HSU_OK && pass == 1 && t0 >= 1);
  hsu_model_free(heavy);
  hsu_body_free(ball);
}

static void plans(void) {
  const char* good = "{\"study\":\"sample\",\"seed\":4,\"n_grid\":[300]}";
  hsu_plan* plan = NULL;
  const uint64_t seed = 9;
  EXPECT(hsu_plan_parse(good, "inline", NULL, &seed, NULL, &plan) == HSU_OK);
  EXPECT(strcmp(hsu_plan_study(plan), "sample") == 0);
  hsu_result* res = NULL;
  EXPECT(hsu_plan_run(plan, &res) == HSU_OK);
  EXPECT(strlen(hsu_result_report(res)) > 0);
  EXPECT(hsu_result_precision_failure(res) == 0);
  hsu_result_free(res);
  hsu_plan_free(plan);

  hsu_plan* bad = NULL;
  EXPECT(hsu_plan_parse("{\"study\":\"sample\",\"bogus\":1}", "inline", NULL, NULL, NULL, &bad) == HSU_E_CONFIG);
  EXPECT(strstr(hsu_last_error(), "bogus") != NULL);
  EXPECT(hsu_plan_parse("{\"study\":\n}", "inline", NULL, NULL, NULL, &bad) == HSU_E_CONFIG);
  EXPECT(strstr(hsu_last_error(), "line 2") != NULL);
  EXPECT(hsu_plan_parse(good, "inline", "clt", NULL, NULL, &bad) == HSU_E_CONFIG);
  EXPECT(strstr(hsu_last_error(), "study") != NULL);
  EXPECT(hsu_plan_load("/nonexistent.json", NULL, NULL, NULL, &bad) == HSU_E_CONFIG);
  EXPECT(bad == NULL);
}

int main(void) {
  EXPECT(strlen(hsu_version()) > 0);
  EXPECT(strcmp(hsu_status_name(HSU_E_CONFIG), "") != 0);
  bodies();
  sampling_and_ustats();
  plans();
  if (failures) {
    fprintf(stderr, "%d failures\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
