#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "closedloop/errors.hpp"
#include "closedloop/scenario.hpp"

namespace {

int cmd_run(const std::vector<std::string>& configs, const std::string& csv_path,
            const std::string& json_path, bool quiet) {
  if (configs.size() > 1) {
    if (!csv_path.empty() || !json_path.empty()) {
      std::cerr << "--csv/--json overrides apply to a single config\n";
      return 1;
    }
    return closedloop::run_batch(configs, quiet);
  }
  try {
    const closedloop::ScenarioConfig config = closedloop::validate_config_file(configs.front());
    const closedloop::ScenarioResult result = closedloop::run_scenario(config, csv_path, json_path);
    if (!quiet) std::cout << result.report.dump(2) << "\n";
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_check(const std::string& path) {
  try {
    const closedloop::ScenarioConfig config = closedloop::validate_config_file(path);
    std::cout << closedloop::serialize_config(config) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 1;
  }
}

int cmd_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    std::cerr << "cannot read " << path << "\n";
    return 1;
  }
  nlohmann::ordered_json report;
  try {
    f >> report;
  } catch (const std::exception& e) {
    std::cerr << "invalid report JSON: " << e.what() << "\n";
    return 1;
  }
  std::cout << "scenario: " << report.value("scenario", std::string("<unnamed>")) << "\n";
  std::cout << "kind:     " << report.value("kind", std::string("?")) << "\n";
  if (report.contains("error")) {
    std::cout << "ERROR     " << report.at("error").get<std::string>() << "\n";
    return 0;
  }
  if (report.contains("fitted_rate")) {
    std::cout << "rates:    fitted " << report.at("fitted_rate").get<double>();
    if (report.contains("theoretical_rate")) {
      std::cout << " vs theoretical " << report.at("theoretical_rate").get<double>();
    }
    std::cout << "\n";
  }
  if (report.contains("kappa")) {
    std::cout << "kappa:    " << report.at("kappa").get<double>() << "  tau_hat: "
              << report.value("tau_hat", 0.0) << "\n";
  }
  if (report.contains("w1")) std::cout << "w1:       " << report.at("w1").get<double>() << "\n";
  if (report.contains("checks")) {
    for (const auto& c : report.at("checks")) {
      const bool ok = c.value("satisfied", false);
      std::cout << (ok ? "PASS      " : "FAIL      ") << c.value("type", std::string("?"));
      if (c.contains("max_violation")) {
        std::cout << "  max_violation=" << c.at("max_violation").get<double>();
      }
      std::cout << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closedloop: desk-scale dynamics for decision-dependent monotone inclusions"};
  app.require_subcommand(1);

  std::vector<std::string> run_configs;
  std::string csv_path, json_path;
  bool quiet = false;
  CLI::App* run = app.add_subcommand("run", "run one or more scenario configs");
  run->add_option("config", run_configs, "scenario JSON path(s)")->required()->check(CLI::ExistingFile);
  run->add_option("--csv", csv_path, "trajectory CSV output path (single config)");
  run->add_option("--json", json_path, "JSON report output path (single config)");
  run->add_flag("--quiet", quiet, "suppress stdout report");

  std::string check_path;
  CLI::App* check = app.add_subcommand("check", "validate a config and echo its normal form");
  check->add_option("config", check_path, "scenario JSON path")->required()->check(CLI::ExistingFile);

  std::string report_path;
  CLI::App* report = app.add_subcommand("report", "pretty-print the verdicts of a JSON report");
  report->add_option("report", report_path, "report JSON path")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(run_configs, csv_path, json_path, quiet);
  if (check->parsed()) return cmd_check(check_path);
  return cmd_report(report_path);
}
