#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsu/config.hpp"
#include "hsu/limits.hpp"
#include "hsu/sampling.hpp"
#include "hsu/ustat.hpp"

namespace hsu {

inline constexpr const char* kVersion = "0.1.0";

struct StudyResult {
  nlohmann::json report;
  std::map<std::string, std::string> files;  // relative path -> contents
  std::vector<std::string> warnings;
  bool precision_failure = false;
};

// Everything a study needs that depends only on (plan, generator).
struct StudySetup {
  BodyPtr body;
  std::shared_ptr<DensityModel> model;
  KernelPtr kernel;
  std::vector<double> n, t, r;
  TailParams tail;
  NormalizerFamily family = NormalizerFamily::LightXi;
  Regime regime;
  std::vector<AffineFrame> frames;
};

StudySetup prepare_study(const ExperimentPlan& plan, const GeneratorSpec& generator);

// values[rep * angles + a] = S_{k,n}(theta_a) for one replicate; all angles of
// a replicate are restrictions of one parent cloud.
struct ReplicateValues {
  std::size_t replicates = 0, angles = 0;
  std::vector<double> values;
  std::vector<double> column(std::size_t a) const;
  std::vector<double> combined(const std::vector<double>& weights) const;
};

ReplicateValues simulate_restricted(const ExperimentPlan& plan, const StudySetup& setup, std::size_t grid_index);
ReplicateValues simulate_conditional(const ExperimentPlan& plan, const StudySetup& setup, std::size_t grid_index);

struct SlopeEstimate {
  double slope = 0.0, lo = 0.0, hi = 0.0, se = 0.0;
  std::size_t points = 0;
};

// Least squares on the last five grid points of log d_K against log n, with a
// percentile bootstrap over replicates.
SlopeEstimate dk_slope(const std::vector<double>& n, const std::vector<std::vector<double>>& samples, int bootstrap,
                       std::uint64_t seed);

nlohmann::json to_json(const LimitConstant& c);
LimitConstant limit_from_json(const nlohmann::json& j);

// Loads the constant from cache_dir when present, otherwise computes and stores it.
LimitConstant cached_constant(const std::string& cache_dir, const nlohmann::json& key,
                              const std::function<LimitConstant()>& compute);

StudyResult run_moment_study(const ExperimentPlan& plan);
StudyResult run_clt_study(const ExperimentPlan& plan);
StudyResult run_independence_study(const ExperimentPlan& plan);
StudyResult run_conditional_study(const ExperimentPlan& plan);
StudyResult run_rates_study(const ExperimentPlan& plan);
StudyResult run_sample(const ExperimentPlan& plan);
StudyResult run_ustat(const ExperimentPlan& plan);
StudyResult run_limits(const ExperimentPlan& plan);

// Dispatch on plan.study (verify is the moment study).
StudyResult run_study(const ExperimentPlan& plan);

// Writes report files plus manifest.json (config hash, seed, version).
void write_artifacts(const StudyResult& result, const ExperimentPlan& plan, const std::string& out_dir);

PointCloud read_points_csv(const std::string& path);
std::string points_csv(const PointCloud& cloud);

}  // namespace hsu
