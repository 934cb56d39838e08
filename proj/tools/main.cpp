// Command-line front end: sensitivity auditing for stratified randomized
// experiments with binary outcomes.

#include "sensaudit/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Exact sensitivity auditing of randomized experiments under outcome "
               "misclassification"};
  app.require_subcommand(1);

  sensaudit::RunConfig config;
  std::string alpha = "0.05", p0, p1, enum_cap = "1000000";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--input", config.input, "experiment CSV (stratum,treated,outcome)")
        ->required();
    cmd->add_option("--output", config.output, "report path (default: stdout)");
    cmd->add_option("--alpha", alpha, "test level (default 0.05)");
    cmd->add_option("--null", config.null_kind, "sharp | weak");
    cmd->add_option("--method", config.method, "chisq | exact");
    cmd->add_option("--sided", config.sided, "one | two (exact method)");
    cmd->add_option("--enum-cap", enum_cap, "assignment enumeration cap");
    cmd->add_option("--oracle-cap", config.oracle_cap, "subject cap for brute force");
    cmd->add_option("--budget-nodes", config.budget_nodes, "solver node budget");
    cmd->add_option("--budget-seconds", config.budget_seconds, "solver time budget");
  };

  CLI::App* analyze = app.add_subcommand("analyze", "warning accuracy and sensitivity report");
  add_common(analyze);
  CLI::App* design = app.add_subcommand("design", "Monte-Carlo design accuracy");
  add_common(design);
  design->add_option("--p0", p0, "control positive-outcome probability")->required();
  design->add_option("--p1", p1, "treated positive-outcome probability")->required();
  design->add_option("--replications", config.replications, "replications (default 1000)");
  design->add_option("--seed", config.seed, "generator seed");
  CLI::App* pvalue = app.add_subcommand("pvalue", "decision and p-value only");
  add_common(pvalue);
  CLI::App* oracle = app.add_subcommand("oracle", "brute-force optimum and all witnesses");
  add_common(oracle);

  CLI11_PARSE(app, argc, argv);

  try {
    config.alpha = sensaudit::parse_rational(alpha);
    config.enum_cap = sensaudit::BigInt(enum_cap);
    if (!p0.empty()) {
      config.p0 = sensaudit::parse_rational(p0);
      config.p0_set = true;
    }
    if (!p1.empty()) {
      config.p1 = sensaudit::parse_rational(p1);
      config.p1_set = true;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  config.command = app.get_subcommands().front()->get_name();
  return sensaudit::run(config);
}
