#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsu/density.hpp"
#include "hsu/limits.hpp"
#include "hsu/ustat.hpp"

namespace hsu {

// Threshold or radius as a function of n.
//   const:    value
//   log:      c log n
//   sqrt_log: sqrt(2 c log n)
//   power:    value * n^exponent (t rules default exponent = c / alpha)
//   list:     values aligned with the n grid
struct SequenceRule {
  std::string kind = "const";
  double value = 1.0;
  double c = 1.0;
  std::optional<double> exponent;
  std::vector<double> values;

  std::vector<double> evaluate(const std::vector<double>& n, double alpha = 0.0) const;
};

enum class SamplingMode { Shell, Full };

struct ExperimentPlan {
  std::string study;
  std::uint64_t seed = 1;
  std::string body = "ball";
  int dim = 2;
  GeneratorSpec model;
  std::vector<GeneratorSpec> models;
  KernelSpec kernel;
  std::vector<Vec> angles;
  std::vector<double> weights;
  std::vector<double> n_grid;
  SequenceRule t_rule, r_rule;
  int replicates = 2000;
  std::optional<RegimeKind> regime;
  std::optional<double> chi;
  TailOverride limits;
  McOptions mc;
  std::uint64_t tuple_budget = 2'000'000'000ULL;
  std::vector<double> thresholds;
  int bootstrap = 500;
  int threads = 1;
  SamplingMode sampling = SamplingMode::Shell;
  bool conditional = false;       // sample study: draw from f_n instead of f
  bool strict_precision = false;  // precision warnings become failures
  std::string cache_dir;          // empty: no cache
  std::string points;             // ustat study input CSV
  std::optional<double> radius;   // ustat study radius
  nlohmann::json raw;

  std::vector<double> thresholds_t() const;
  std::vector<double> radii() const;
};

// Field-specific Config errors; JSON syntax errors report line and column.
ExperimentPlan parse_plan(const std::string& text, const std::string& source = "<config>");
ExperimentPlan load_plan(const std::string& path);

GeneratorSpec parse_generator(const nlohmann::json& j, const std::string& field);
KernelSpec parse_kernel(const nlohmann::json& j, const std::string& field);
nlohmann::json generator_json(const GeneratorSpec& g);
nlohmann::json kernel_json(const KernelSpec& k);

}  // namespace hsu
