#include <doctest.h>

#include <cmath>
#include <string>

#include "hsu/config.hpp"
#include "hsu/errors.hpp"

using namespace hsu;

namespace {

const std::string kBase = R"({"study":"verify","n_grid":[100,1000],"t_rule":{"kind":"log","c":0.5}})";

std::string with(const std::string& extra) { return kBase.substr(0, kBase.size() - 1) + "," + extra + "}"; }

// message of the Config error raised by parse_plan, or "" if none
std::string config_error(const std::string& text) {
  try {
    parse_plan(text, "cfg.json");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  return "";
}

bool mentions(const std::string& msg, const std::string& part) { return msg.find(part) != std::string::npos; }

}  // namespace

TEST_SUITE("config") {

TEST_CASE("minimal plan and defaults") {
  const ExperimentPlan p = parse_plan(kBase);
  CHECK(p.study == "verify");
  CHECK(p.body == "ball");
  CHECK(p.dim == 2);
  REQUIRE(p.angles.size() == 1);
  CHECK(p.angles[0][1] == 1.0);
  CHECK(p.weights == std::vector<double>{1.0});
  CHECK(p.sampling == SamplingMode::Shell);
  const auto t = p.thresholds_t();
  CHECK(t[1] == doctest::Approx(0.5 * std::log(1000.0)));
  CHECK(p.radii() == std::vector<double>{1.0, 1.0});
}

TEST_CASE("grids and rules") {
  const ExperimentPlan p = parse_plan(R"({"study":"verify","n_grid":{"from":10,"to":1000,"points":3},
    "t_rule":{"kind":"sqrt_log","c":1},"r_rule":{"kind":"power","value":2,"exponent":-0.5}})");
  REQUIRE(p.n_grid.size() == 3);
  CHECK(p.n_grid[1] == doctest::Approx(100));
  CHECK(p.thresholds_t()[2] == doctest::Approx(std::sqrt(2 * std::log(1000.0))));
  CHECK(p.radii()[0] == doctest::Approx(2 / std::sqrt(10.0)));
  const ExperimentPlan h = parse_plan(R"({"study":"verify","n_grid":[16,256],"model":{"kind":"heavy","alpha":4},
    "t_rule":{"kind":"power","value":1,"c":1}})");
  CHECK(h.thresholds_t()[1] == doctest::Approx(std::pow(256.0, 0.25)));
  CHECK(config_error(with(R"("t_rule":{"kind":"list","values":[1]})")) == "");
  CHECK_THROWS_AS(parse_plan(with(R"("t_rule":{"kind":"list","values":[1]})")).thresholds_t(), Error);
}

TEST_CASE("unknown fields name their path") {
  CHECK(mentions(config_error(with(R"("replicas":10)")), "field 'replicas': unknown field"));
  CHECK(mentions(config_error(with(R"("mc":{"sample":10})")), "'mc.sample'"));
  CHECK(mentions(config_error(with(R"("model":{"kind":"light","xi":1})")), "'model.xi'"));
  CHECK(mentions(config_error(with(R"("kernel":{"kind":"edge","r":1})")), "'kernel.r'"));
}

TEST_CASE("syntax errors carry line and column") {
  const std::string msg = config_error("{\"study\":\"verify\",\n  \"n_grid\": [1, 2,,]\n}");
  CHECK(mentions(msg, "cfg.json"));
  CHECK(mentions(msg, "line 2, column"));
}

TEST_CASE("field checks") {
  CHECK(mentions(config_error(R"({"study":"nope"})"), "'study'"));
  CHECK(mentions(config_error(R"({"study":"verify"})"), "'n_grid'"));
  CHECK(mentions(config_error(with(R"("angles":[0,1],"weights":[0,0])")), "must not all be zero"));
  CHECK(mentions(config_error(with(R"("angles":[0,1],"weights":[1])")), "one weight per angle"));
  CHECK(mentions(config_error(with(R"("angles":[[0,0]])")), "'angles[0]'"));
  CHECK(mentions(config_error(with(R"("model":{"kind":"light","psi":"t^3"})")), "'model.psi'"));
  CHECK(mentions(config_error(with(R"("model":{"kind":"heavy","alpha":-1})")), "'model.alpha'"));
  CHECK(mentions(config_error(with(R"("kernel":{"kind":"vr","k":0})")), "'kernel.k'"));
  CHECK(mentions(config_error(with(R"("kernel":{"kind":"noninduced"})")), "'kernel.adjacency'"));
  CHECK(mentions(config_error(with(R"("sampling":"half")")), "'sampling'"));
  CHECK(mentions(config_error(with(R"("regime":"tepid")")), "'regime'"));
  CHECK(mentions(config_error(with(R"("threads":0)")), "'threads'"));
}

TEST_CASE("study specific checks") {
  const std::string clt = R"({"study":"clt","n_grid":[100,1000],"t_rule":{"kind":"log","c":0.5},"replicates":99})";
  CHECK(mentions(config_error(clt), "at least 100 replicates"));
  const std::string ind = R"({"study":"independence","n_grid":[100],"angles":[0,1],"thresholds":[0,-1]})";
  CHECK(mentions(config_error(ind), "'thresholds'"));
  const std::string ind1 = R"({"study":"independence","n_grid":[100],"angles":[0],"thresholds":[0,0]})";
  CHECK(mentions(config_error(ind1), "exactly two angles"));
  const std::string cond = R"({"study":"conditional","n_grid":[100,1000],"replicates":100})";
  CHECK(mentions(config_error(cond), "'models'"));
  CHECK(config_error(R"({"study":"sample"})") == "");
}

TEST_CASE("limit overrides accept infinity") {
  const ExperimentPlan p = parse_plan(with(R"("limits":{"xi":"inf","beta":0})"));
  REQUIRE(p.limits.xi);
  CHECK(std::isinf(*p.limits.xi));
  CHECK(*p.limits.beta == 0.0);
  CHECK(mentions(config_error(with(R"("limits":{"xi":"big"})")), "'limits.xi'"));
}

TEST_CASE("generator and kernel round trips") {
  const GeneratorSpec g = parse_generator(nlohmann::json::parse(R"({"kind":"light","psi":"gaussian"})"), "m");
  CHECK(g.psi == "t^2/2");
  CHECK(parse_generator(generator_json(g), "m").psi == g.psi);
  const KernelSpec k = parse_kernel(nlohmann::json::parse(
      R"({"kind":"combination","terms":[{"weight":2,"kernel":{"kind":"edge"}},{"weight":-1,"kernel":{"kind":"vr","k":1}}]})"), "k");
  CHECK(k.terms.size() == 2);
  CHECK(kernel_json(parse_kernel(kernel_json(k), "k")) == kernel_json(k));
  const KernelSpec s = parse_kernel(nlohmann::json::parse(R"({"kind":"induced","k":2,"adjacency":[[0,1],[1,2]]})"), "k");
  CHECK(s.edges.size() == 2);
}

TEST_CASE("missing file") {
  try {
    load_plan("/nonexistent/plan.json");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

}
