#include "sensaudit/cli.hpp"

#include "sensaudit/report_json.hpp"

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace sensaudit;

namespace {

const std::string kData = SENSAUDIT_DATA_DIR;
const std::string kGolden = SENSAUDIT_GOLDEN_DIR;

std::string temp_path(const std::string& name) {
  return std::string(::getenv("TMPDIR") ? ::getenv("TMPDIR") : "/tmp") + "/sensaudit_" + name;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  return j;
}

nlohmann::json strip_timing(nlohmann::json j) {
  j.erase("timing");
  return j;
}

RunConfig base_config(const std::string& command, const std::string& input,
                      const std::string& output) {
  RunConfig c;
  c.command = command;
  c.input = kData + "/" + input;
  c.output = output;
  return c;
}

}  // namespace

TEST_CASE("analyze command: study 1 under the exact method") {
  const std::string out = temp_path("analyze_study1.json");
  RunConfig c = base_config("analyze", "study1.csv", out);
  c.method = "exact";
  REQUIRE(run(c) == 0);
  const nlohmann::json j = load_json(out);
  CHECK(j["schema_version"] == 1);
  CHECK(j["command"] == "analyze");
  CHECK(j["p_value"]["num"] == "1");
  CHECK(j["p_value"]["den"] == "144");
  CHECK(j["warning_accuracy"]["num"] == "16");
  CHECK(j["warning_accuracy"]["den"] == "17");
  CHECK(j["minimal_alteration_number"] == 1);
  CHECK(j["measured_decision"]["reject"] == true);
  std::remove(out.c_str());
}

TEST_CASE("pvalue command: single-treated experiment") {
  const std::string out = temp_path("pvalue_example1.json");
  RunConfig c = base_config("pvalue", "example1.csv", out);
  c.method = "exact";
  REQUIRE(run(c) == 0);
  const nlohmann::json j = load_json(out);
  CHECK(j["p_value"]["num"] == "1");
  CHECK(j["p_value"]["den"] == "1001");
  CHECK(j["decision"]["reject"] == true);
  std::remove(out.c_str());
}

TEST_CASE("design command: never-rejecting design estimates zero") {
  const std::string out = temp_path("design_zero.json");
  RunConfig c = base_config("design", "never_reject4.csv", out);
  c.p0 = Rational(1, 5);
  c.p1 = Rational(1, 5);
  c.p0_set = c.p1_set = true;
  c.replications = 10;
  c.seed = 7;
  REQUIRE(run(c) == 0);
  const nlohmann::json j = load_json(out);
  CHECK(j["estimate"] == 0.0);
  CHECK(j["replications"] == 10);
  CHECK(j["flagged_replications"] == 0);
  std::remove(out.c_str());
}

TEST_CASE("oracle command lists every optimal witness") {
  const std::string out = temp_path("oracle_study1.json");
  RunConfig c = base_config("oracle", "study1.csv", out);
  c.method = "exact";
  REQUIRE(run(c) == 0);
  const nlohmann::json j = load_json(out);
  CHECK(j["overturnable"] == true);
  CHECK(j["warning_accuracy"]["num"] == "16");
  REQUIRE(j["optimal_witnesses"].is_array());
  CHECK(j["optimal_witnesses"].size() == 1);
  CHECK(j["witness"] == j["optimal_witnesses"][0]);
  std::remove(out.c_str());
}

TEST_CASE("validation failures exit with code 2") {
  RunConfig missing = base_config("analyze", "does_not_exist.csv", "");
  CHECK(run(missing) == 2);

  RunConfig bad_alpha = base_config("analyze", "study1.csv", "");
  bad_alpha.alpha = Rational(2);
  CHECK(run(bad_alpha) == 2);

  RunConfig design_missing_p = base_config("design", "never_reject4.csv", "");
  CHECK(run(design_missing_p) == 2);

  RunConfig weak_exact = base_config("analyze", "study1.csv", "");
  weak_exact.null_kind = "weak";
  weak_exact.method = "exact";
  CHECK(run(weak_exact) == 2);

  RunConfig unknown = base_config("frobnicate", "study1.csv", "");
  CHECK(run(unknown) == 2);
}

TEST_CASE("exhausted budgets exit with code 3") {
  const std::string out = temp_path("budget.json");
  RunConfig c = base_config("analyze", "example1.csv", out);
  c.budget_nodes = 1;
  CHECK(run(c) == 3);
  const nlohmann::json j = load_json(out);
  CHECK(j["solver"]["status"] == "budget_exceeded");
  CHECK_FALSE(j.contains("warning_accuracy"));
  CHECK(j.contains("incumbent_lower_bound"));
  std::remove(out.c_str());
}

TEST_CASE("reports are byte-identical across runs, timing aside") {
  for (const std::string method : {"exact", "chisq"}) {
    const std::string out1 = temp_path("det1.json");
    const std::string out2 = temp_path("det2.json");
    RunConfig c = base_config("analyze", "study2.csv", out1);
    c.method = method;
    REQUIRE(run(c) == 0);
    c.output = out2;
    REQUIRE(run(c) == 0);
    CHECK(strip_timing(load_json(out1)).dump(2) == strip_timing(load_json(out2)).dump(2));
    std::remove(out1.c_str());
    std::remove(out2.c_str());
  }
}

TEST_CASE("golden reports per command") {
  struct Case {
    const char* name;
    RunConfig config;
  };
  RunConfig analyze = base_config("analyze", "study1.csv", "");
  analyze.method = "exact";
  RunConfig pvalue = base_config("pvalue", "study2.csv", "");
  pvalue.method = "exact";
  RunConfig design = base_config("design", "never_reject4.csv", "");
  design.p0 = Rational(1, 5);
  design.p1 = Rational(2, 5);
  design.p0_set = design.p1_set = true;
  design.replications = 5;
  design.seed = 7;
  RunConfig oracle = base_config("oracle", "study2.csv", "");
  oracle.method = "exact";

  for (auto& [name, config] : std::vector<Case>{{"analyze", analyze},
                                                {"pvalue", pvalue},
                                                {"design", design},
                                                {"oracle", oracle}}) {
    CAPTURE(name);
    const std::string out = temp_path(std::string("golden_") + name + ".json");
    config.output = out;
    REQUIRE(run(config) == 0);
    nlohmann::json produced = strip_timing(load_json(out));
    // Golden files live under version control with the input path relativized.
    produced["input"] = std::string("tests/data/") + produced["input"].get<std::string>().substr(
                            kData.size() + 1);
    const nlohmann::json golden = load_json(kGolden + "/" + name + ".json");
    CHECK(produced.dump(2) == golden.dump(2));
    std::remove(out.c_str());
  }
}

TEST_CASE("the installed binary runs end to end") {
  const std::string out = temp_path("binary_run.json");
  const std::string cmd = std::string(SENSAUDIT_CLI_PATH) + " analyze --input " + kData +
                          "/study1.csv --method exact --output " + out + " >/dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const nlohmann::json j = load_json(out);
  CHECK(j["warning_accuracy"]["den"] == "17");
  std::remove(out.c_str());

  const std::string bad = std::string(SENSAUDIT_CLI_PATH) + " analyze --input /nonexistent.csv" +
                          " >/dev/null 2>&1";
  const int rc = std::system(bad.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
}
