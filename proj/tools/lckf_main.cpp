// lckf: scenario runner for constrained-filter experiments.
//
//   lckf run <scenario.json>       run the scenario's filter, write reports
//   lckf compare <scenario.json>   paired-seed comparison of named filters
//   lckf validate <scenario.json>  model checks + recursion-vs-batch oracle
//
// Exit codes: 0 success, 2 parse/argument error, 3 model validation failure,
// 4 runtime filter error.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lckf/scenario.hpp"

namespace {

struct Overrides {
  std::int64_t seed = -1;
  int trials = -1;
  int horizon = -1;
  std::string out_dir;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Base seed override");
  cmd->add_option("--trials", o.trials, "Trial count override");
  cmd->add_option("--horizon", o.horizon, "Truncate the horizon");
  cmd->add_option("--out-dir", o.out_dir, "Report directory override");
}

int load_with_overrides(const std::string& path, const Overrides& o,
                        lckf::ScenarioFile& file) {
  try {
    file = lckf::load_scenario_file(path);
    if (o.horizon > 0) lckf::truncate_horizon(file, o.horizon);
  } catch (const lckf::Error& e) {
    std::cerr << "lckf: " << e.what() << "\n";
    return 2;
  }
  if (o.seed >= 0) file.scenario.seed = static_cast<std::uint64_t>(o.seed);
  if (o.trials > 0) file.scenario.trials = o.trials;
  if (!o.out_dir.empty()) file.out_dir = o.out_dir;
  return 0;
}

int check_model(const lckf::ScenarioFile& file) {
  const lckf::ValidationReport report =
      lckf::validate_model(file.scenario.model);
  if (!report.all_passed()) {
    std::cerr << "lckf: model validation failed\n" << report.summary();
    return 3;
  }
  return 0;
}

int write_outputs(const lckf::RunReport& report,
                  const lckf::ScenarioFile& file) {
  lckf::write_report_files(report, file.out_dir);
  std::cout << "seed " << report.seed << ", trials " << report.trials
            << ", horizon " << report.horizon << "\n";
  std::cout << "elapsed " << report.elapsed_seconds << " s ("
            << lckf::harness_thread_count() << " threads)\n";
  std::cout << "wrote " << file.out_dir << "/report.json and "
            << file.out_dir << "/steps.csv\n";
  return 0;
}

std::vector<std::string> split_filters(const std::string& arg) {
  std::vector<std::string> names;
  std::istringstream in(arg);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) names.push_back(item);
  }
  return names;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained Kalman filtering toolkit"};
  app.require_subcommand(1);

  std::string path;
  Overrides overrides;
  std::string filters_arg;

  CLI::App* cmd_run = app.add_subcommand("run", "Run a scenario");
  cmd_run->add_option("scenario", path, "Scenario JSON file")->required();
  add_override_flags(cmd_run, overrides);

  CLI::App* cmd_compare =
      app.add_subcommand("compare", "Compare filters under paired seeds");
  cmd_compare->add_option("scenario", path, "Scenario JSON file")->required();
  cmd_compare
      ->add_option("--filters", filters_arg,
                   "Comma-separated names: kf,lmvdrf,lckf,lclmvdrf,lcmve")
      ->required();
  add_override_flags(cmd_compare, overrides);

  CLI::App* cmd_validate =
      app.add_subcommand("validate", "Validate a scenario");
  cmd_validate->add_option("scenario", path, "Scenario JSON file")->required();
  add_override_flags(cmd_validate, overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  lckf::ScenarioFile file;
  if (int rc = load_with_overrides(path, overrides, file); rc != 0) return rc;

  if (cmd_run->parsed()) {
    if (int rc = check_model(file); rc != 0) return rc;
    try {
      const lckf::RunReport report = lckf::run_trials(file.scenario);
      return write_outputs(report, file);
    } catch (const lckf::Error& e) {
      std::cerr << "lckf: " << e.what() << "\n";
      return 4;
    }
  }

  if (cmd_compare->parsed()) {
    const std::vector<std::string> names = split_filters(filters_arg);
    if (names.empty()) {
      std::cerr << "lckf: --filters needs at least one name\n";
      return 2;
    }
    if (int rc = check_model(file); rc != 0) return rc;
    try {
      const lckf::RunReport report =
          lckf::compare_filters(file.scenario, names);
      return write_outputs(report, file);
    } catch (const lckf::Error& e) {
      std::cerr << "lckf: " << e.what() << "\n";
      return e.code() == lckf::ErrorCode::kParse ? 2 : 4;
    }
  }

  if (cmd_validate->parsed()) {
    try {
      const lckf::ScenarioValidation result = lckf::validate_scenario(file);
      std::cout << result.table();
      return result.hard_failure() ? 3 : 0;
    } catch (const lckf::Error& e) {
      std::cerr << "lckf: " << e.what() << "\n";
      return 4;
    }
  }

  return 2;
}
