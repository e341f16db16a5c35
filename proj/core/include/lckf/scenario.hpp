#ifndef LCKF_SCENARIO_HPP
#define LCKF_SCENARIO_HPP

#include <filesystem>
#include <string>

#include "lckf/harness.hpp"

namespace lckf {

/// A scenario file is a JSON document with sections `model`, `schedule`,
/// `init`, `experiment` and `outputs`. Matrices are objects
/// {"rows": R, "cols": C, "data": [[...], ...]} with row-major nested
/// arrays; the explicit dims are cross-checked against the data at parse
/// time. Time-invariant models may give a single matrix where a per-step
/// sequence is expected; it is broadcast across the horizon.
///
/// `schedule` is either {"preset": "kf"|"lmvdrf"|"lclmvdrf"|"lcmve"} or/and
/// {"steps": [{"k": 2, "family": "C2", "Delta": M, "T": M}, ...]}; presets
/// expand to full schedules at load time so reports can record the stacked
/// constraint dimensions.
struct ScenarioFile {
  Scenario scenario;
  std::string preset;  // empty when the schedule was given step by step
  std::string out_dir = "out";
};

ScenarioFile load_scenario_file(const std::filesystem::path& path);
ScenarioFile parse_scenario_json(const std::string& text);

/// Shrinks the experiment to the first `horizon` steps.
void truncate_horizon(ScenarioFile& file, int horizon);

std::string report_to_json(const RunReport& report);
std::string steps_to_csv(const RunReport& report);
void write_report_files(const RunReport& report,
                        const std::filesystem::path& out_dir);

/// Scenario-level validation: model checks, the exact uncorrelation-
/// condition residuals behind the predictor/corrector recursion, and (when
/// those hold) a recursion-vs-batch equivalence run over the first
/// min(K, 6) steps.
struct ScenarioValidation {
  ValidationReport model_report;
  bool conditions_checked = false;
  bool conditions_satisfied = false;
  double conditions_residual = 0.0;
  bool equivalence_checked = false;
  bool equivalence_passed = false;
  double equivalence_max_rel_err = 0.0;
  std::string notes;

  bool hard_failure() const;
  std::string table() const;
};

ScenarioValidation validate_scenario(const ScenarioFile& file);

}  // namespace lckf

#endif  // LCKF_SCENARIO_HPP
