#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "hsu/hsu.h"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = "out";
};

// 2: config error, 3: numeric or precision failure, 1: anything else (i/o, internal).
int exit_code(int status) {
  switch (status) {
    case HSU_OK: return 0;
    case HSU_E_CONFIG:
    case HSU_E_CLASSIFICATION: return 2;
    case HSU_E_IO:
    case HSU_E_INTERNAL:
    case HSU_E_NULL: return 1;
    default: return 3;
  }
}

int run(const std::string& study, const Options& o) {
  hsu_plan* plan = nullptr;
  const std::uint64_t* seed = o.seed ? &*o.seed : nullptr;
  const int* threads = o.threads ? &*o.threads : nullptr;
  int st = hsu_plan_load(o.config.c_str(), study.c_str(), seed, threads, &plan);
  if (st != HSU_OK) {
    std::fprintf(stderr, "hsu: %s: %s\n", hsu_status_name(st), hsu_last_error());
    return exit_code(st);
  }
  hsu_result* result = nullptr;
  st = hsu_plan_run(plan, &result);
  if (st != HSU_OK) {
    std::fprintf(stderr, "hsu: %s: %s\n", hsu_status_name(st), hsu_last_error());
    hsu_plan_free(plan);
    return exit_code(st);
  }
  st = hsu_result_write(result, plan, o.out.c_str());
  for (size_t i = 0; i < hsu_result_warning_count(result); ++i)
    std::fprintf(stderr, "hsu: warning: %s\n", hsu_result_warning(result, i));
  int code = exit_code(st);
  if (st != HSU_OK) {
    std::fprintf(stderr, "hsu: %s: %s\n", hsu_status_name(st), hsu_last_error());
  } else if (hsu_result_precision_failure(result)) {
    std::fprintf(stderr, "hsu: precision failure (strict_precision is set)\n");
    code = 3;
  } else {
    std::printf("%s: results in %s\n", hsu_plan_study(plan), o.out.c_str());
  }
  hsu_result_free(result);
  hsu_plan_free(plan);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Halfspace U-statistics experiment harness"};
  app.set_version_flag("--version", std::string(hsu_version()));
  app.require_subcommand(1);
  Options opt;
  std::string chosen;
  const std::pair<const char*, const char*> commands[] = {
      {"sample", "draw a point cloud"},
      {"ustat", "evaluate a U-statistic on a cloud"},
      {"limits", "compute limit constants"},
      {"verify", "moment study against limit constants"},
      {"clt", "Kolmogorov distance study"},
      {"independence", "joint-CDF gap study"},
      {"conditional", "conditional-rate comparison"},
      {"rates", "Kolmogorov bound diagnostics"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON experiment config")->required();
    sub->add_option("--seed", opt.seed, "override the config seed");
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::Range(1, 1024));
    sub->callback([&chosen, n = std::string(name)] { chosen = n; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return run(chosen, opt);
}
