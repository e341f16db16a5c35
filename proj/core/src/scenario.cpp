#include "lckf/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lckf/batch.hpp"
#include "lckf/linalg.hpp"

namespace lckf {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::kParse, "'" + key + "': " + why);
}

const json& require_key(const json& j, const std::string& key,
                        const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) parse_fail(context + "." + key, "missing");
  return *it;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& key) {
  if (!j.is_object()) parse_fail(key, "expected a matrix object");
  const json& jr = require_key(j, "rows", key);
  const json& jc = require_key(j, "cols", key);
  const json& jd = require_key(j, "data", key);
  if (!jr.is_number_integer() || !jc.is_number_integer()) {
    parse_fail(key, "rows/cols must be integers");
  }
  const int rows = jr.get<int>();
  const int cols = jc.get<int>();
  if (rows < 0 || cols < 0) parse_fail(key, "negative dims");
  if (!jd.is_array() || static_cast<int>(jd.size()) != rows) {
    parse_fail(key, "data has " + std::to_string(jd.size()) +
                        " rows, header says " + std::to_string(rows));
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = jd[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      parse_fail(key, "row " + std::to_string(r) + " has " +
                          std::to_string(row.size()) +
                          " entries, header says " + std::to_string(cols));
    }
    for (int c = 0; c < cols; ++c) {
      const json& v = row[static_cast<size_t>(c)];
      if (!v.is_number()) parse_fail(key, "non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

Eigen::VectorXd parse_vector(const json& j, const std::string& key) {
  if (!j.is_array()) parse_fail(key, "expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) parse_fail(key, "non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

std::vector<Eigen::MatrixXd> parse_matrix_seq(const json& j, int count,
                                              const std::string& key) {
  std::vector<Eigen::MatrixXd> seq;
  if (j.is_object()) {
    seq.assign(static_cast<size_t>(count), parse_matrix(j, key));
  } else if (j.is_array()) {
    if (static_cast<int>(j.size()) != count) {
      parse_fail(key, "expected " + std::to_string(count) +
                          " matrices, got " + std::to_string(j.size()));
    }
    for (size_t i = 0; i < j.size(); ++i) {
      seq.push_back(parse_matrix(j[i], key + "[" + std::to_string(i) + "]"));
    }
  } else {
    parse_fail(key, "expected a matrix object or an array of them");
  }
  return seq;
}

LdssModel parse_model(const json& j) {
  if (!j.is_object()) parse_fail("model", "expected an object");
  LdssModel model;
  const json& jh = require_key(j, "horizon", "model");
  if (!jh.is_number_integer()) parse_fail("model.horizon", "not an integer");
  model.horizon = jh.get<int>();
  if (model.horizon < 1) parse_fail("model.horizon", "must be >= 1");
  const int K = model.horizon;

  model.H = parse_matrix_seq(require_key(j, "H", "model"), K, "model.H");
  model.Cv = parse_matrix_seq(require_key(j, "Cv", "model"), K, "model.Cv");
  if (K > 1) {
    model.F = parse_matrix_seq(require_key(j, "F", "model"), K - 1, "model.F");
    model.Cw =
        parse_matrix_seq(require_key(j, "Cw", "model"), K - 1, "model.Cw");
  }
  if (j.contains("Cwx")) {
    model.Cwx = parse_matrix_seq(j.at("Cwx"), K - 1, "model.Cwx");
  }
  if (j.contains("Cvx")) {
    model.Cvx = parse_matrix_seq(j.at("Cvx"), K, "model.Cvx");
  }
  model.x0_mean = parse_vector(require_key(j, "x0_mean", "model"),
                               "model.x0_mean");
  model.Cx0 = parse_matrix(require_key(j, "Cx0", "model"), "model.Cx0");
  if (j.contains("condition_limit")) {
    const json& cl = j.at("condition_limit");
    if (!cl.is_number()) parse_fail("model.condition_limit", "not a number");
    model.condition_limit = cl.get<double>();
  }
  return model;
}

ConstraintFamily parse_family(const std::string& name) {
  if (name == "none") return ConstraintFamily::kNone;
  if (name == "C1") return ConstraintFamily::kC1;
  if (name == "C2") return ConstraintFamily::kC2;
  if (name == "C3") return ConstraintFamily::kC3;
  parse_fail("schedule.steps.family", "unknown family '" + name + "'");
}

void parse_steps(const json& j, ConstraintSchedule& schedule) {
  if (!j.is_array()) parse_fail("schedule.steps", "expected an array");
  for (const json& entry : j) {
    const json& jk = require_key(entry, "k", "schedule.steps");
    if (!jk.is_number_integer()) parse_fail("schedule.steps.k", "not an integer");
    const int k = jk.get<int>();
    if (k < 1 || k > schedule.horizon()) {
      parse_fail("schedule.steps.k",
                 "step " + std::to_string(k) + " outside the horizon");
    }
    StepConstraint c;
    c.family = parse_family(
        require_key(entry, "family", "schedule.steps").get<std::string>());
    if (entry.contains("Delta")) {
      c.Delta = parse_matrix(entry.at("Delta"), "schedule.steps.Delta");
      c.T = parse_matrix(require_key(entry, "T", "schedule.steps"),
                         "schedule.steps.T");
    }
    schedule.steps[static_cast<size_t>(k) - 1] = std::move(c);
  }
}

const std::string kPresets[] = {"kf", "lmvdrf", "lclmvdrf", "lcmve"};

}  // namespace

ScenarioFile parse_scenario_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  if (!j.is_object()) parse_fail("<root>", "expected an object");

  ScenarioFile file;
  file.scenario.model = parse_model(require_key(j, "model", "<root>"));
  const LdssModel& model = file.scenario.model;

  // Init first: presets may depend on it.
  if (j.contains("init")) {
    const json& ji = j.at("init");
    const std::string type =
        require_key(ji, "type", "init").get<std::string>();
    if (type == "prior") {
      file.scenario.init.kind = InitKind::kPrior;
    } else if (type == "fisher") {
      file.scenario.init.kind = InitKind::kFisher;
    } else if (type == "rwlse") {
      file.scenario.init.kind = InitKind::kRwlse;
      file.scenario.init.Sigma =
          parse_matrix(require_key(ji, "Sigma", "init"), "init.Sigma");
      file.scenario.init.c =
          parse_vector(require_key(ji, "c", "init"), "init.c");
    } else {
      parse_fail("init.type", "unknown init '" + type + "'");
    }
  }

  file.scenario.schedule = empty_schedule(model.horizon);
  if (j.contains("schedule")) {
    const json& js = j.at("schedule");
    if (!js.is_object()) parse_fail("schedule", "expected an object");
    if (js.contains("steps")) parse_steps(js.at("steps"), file.scenario.schedule);
    if (js.contains("preset")) {
      const std::string preset = js.at("preset").get<std::string>();
      if (std::find(std::begin(kPresets), std::end(kPresets), preset) ==
          std::end(kPresets)) {
        parse_fail("schedule.preset", "unknown preset '" + preset + "'");
      }
      file.preset = preset;
      if (preset == "kf") {
        file.scenario.schedule = empty_schedule(model.horizon);
      } else if (preset == "lmvdrf") {
        file.scenario.schedule = lmvdrf_schedule(model);
        file.scenario.init.kind = InitKind::kFisher;
      } else if (preset == "lclmvdrf") {
        file.scenario.schedule =
            lckf_to_lclmvdrf(file.scenario.schedule, model);
        file.scenario.init.kind = InitKind::kFisher;
      } else if (preset == "lcmve") {
        require_static_regime(model);
        if (file.scenario.init.kind == InitKind::kPrior) {
          file.scenario.init.kind = InitKind::kFisher;
        }
      }
    }
  }

  if (j.contains("experiment")) {
    const json& je = j.at("experiment");
    if (je.contains("trials")) {
      if (!je.at("trials").is_number_integer() ||
          je.at("trials").get<long long>() < 1) {
        parse_fail("experiment.trials", "must be a positive integer");
      }
      file.scenario.trials = je.at("trials").get<int>();
    }
    if (je.contains("seed")) {
      if (!je.at("seed").is_number_integer()) {
        parse_fail("experiment.seed", "must be an integer");
      }
      file.scenario.seed = je.at("seed").get<std::uint64_t>();
    }
    if (je.contains("x1_override")) {
      file.scenario.x1_override =
          parse_vector(je.at("x1_override"), "experiment.x1_override");
    }
  }

  if (j.contains("outputs")) {
    const json& jo = j.at("outputs");
    if (jo.contains("dir")) file.out_dir = jo.at("dir").get<std::string>();
  }
  return file;
}

ScenarioFile load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kParse, "cannot open '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_json(buffer.str());
}

void truncate_horizon(ScenarioFile& file, int horizon) {
  LdssModel& model = file.scenario.model;
  if (horizon < 1 || horizon > model.horizon) {
    throw Error(ErrorCode::kParse,
                "horizon override " + std::to_string(horizon) +
                    " outside [1, " + std::to_string(model.horizon) + "]");
  }
  model.horizon = horizon;
  model.F.resize(static_cast<size_t>(horizon - 1));
  model.Cw.resize(static_cast<size_t>(horizon - 1));
  model.H.resize(static_cast<size_t>(horizon));
  model.Cv.resize(static_cast<size_t>(horizon));
  if (!model.Cwx.empty()) model.Cwx.resize(static_cast<size_t>(horizon - 1));
  if (!model.Cvx.empty()) model.Cvx.resize(static_cast<size_t>(horizon));
  file.scenario.schedule.steps.resize(static_cast<size_t>(horizon));
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

std::string report_to_json(const RunReport& report) {
  json j;
  j["seed"] = report.seed;
  j["trials"] = report.trials;
  j["horizon"] = report.horizon;
  json filters = json::array();
  for (const FilterReport& fr : report.filters) {
    json jf;
    jf["name"] = fr.name;
    jf["kind"] = to_string(fr.kind);
    jf["init"] = to_string(fr.init);
    jf["stacked_constraint"] = {{"rows", fr.lambda_rows},
                                {"cols", fr.lambda_cols}};
    json steps = json::array();
    for (size_t k = 0; k < fr.steps.size(); ++k) {
      const StepStats& s = fr.steps[k];
      json js;
      js["k"] = k + 1;
      js["theo_mse_trace"] = s.theo_trace;
      js["emp_mse_trace"] = s.emp_trace;
      js["bias_norm"] = s.bias_norm;
      js["constraint_residual"] = s.constraint_residual;
      js["theoretical_P"] = matrix_to_json(s.theoretical_P);
      js["empirical_mse"] = matrix_to_json(s.empirical_mse);
      js["bias"] = vector_to_json(s.bias);
      steps.push_back(std::move(js));
    }
    jf["steps"] = std::move(steps);
    filters.push_back(std::move(jf));
  }
  j["filters"] = std::move(filters);
  json cross = json::array();
  for (const Eigen::MatrixXd& m : report.sq_err_cross) {
    cross.push_back(matrix_to_json(m));
  }
  j["sq_err_cross"] = std::move(cross);
  return j.dump(2) + "\n";
}

std::string steps_to_csv(const RunReport& report) {
  std::ostringstream out;
  out << "step,est_mse_trace,theo_mse_trace,bias_norm,constraint_residual";
  const bool multi = report.filters.size() > 1;
  if (multi) {
    for (const FilterReport& fr : report.filters) {
      out << ",theo_trace_" << fr.name << ",emp_trace_" << fr.name;
    }
  }
  out << "\n";
  for (int k = 0; k < report.horizon; ++k) {
    const StepStats& base = report.filters.front().steps[static_cast<size_t>(k)];
    out << (k + 1) << "," << fmt(base.emp_trace) << ","
        << fmt(base.theo_trace) << "," << fmt(base.bias_norm) << ","
        << fmt(base.constraint_residual);
    if (multi) {
      for (const FilterReport& fr : report.filters) {
        const StepStats& s = fr.steps[static_cast<size_t>(k)];
        out << "," << fmt(s.theo_trace) << "," << fmt(s.emp_trace);
      }
    }
    out << "\n";
  }
  return out.str();
}

void write_report_files(const RunReport& report,
                        const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream f(out_dir / "report.json", std::ios::binary);
    f << report_to_json(report);
  }
  {
    std::ofstream f(out_dir / "steps.csv", std::ios::binary);
    f << steps_to_csv(report);
  }
}

bool ScenarioValidation::hard_failure() const {
  if (!model_report.all_passed()) return true;
  if (equivalence_checked && !equivalence_passed) return true;
  return false;
}

std::string ScenarioValidation::table() const {
  std::ostringstream out;
  out << model_report.summary();
  if (conditions_checked) {
    out << (conditions_satisfied ? "PASS" : "FAIL")
        << "  recursion uncorrelation conditions (max residual "
        << conditions_residual << ")\n";
  }
  if (equivalence_checked) {
    out << (equivalence_passed ? "PASS" : "FAIL")
        << "  recursion-vs-batch equivalence (max relative error "
        << equivalence_max_rel_err << ")\n";
  } else if (!notes.empty()) {
    out << "SKIP  recursion-vs-batch equivalence: " << notes << "\n";
  }
  return out.str();
}

ScenarioValidation validate_scenario(const ScenarioFile& file) {
  const Scenario& scenario = file.scenario;
  const LdssModel& model = scenario.model;

  ScenarioValidation result;
  result.model_report = validate_model(model);
  if (!result.model_report.all_passed()) {
    result.notes = "model validation failed";
    return result;
  }

  const UncorrelationReport conditions =
      uncorrelation_condition_residuals(model, model.horizon);
  result.conditions_checked = true;
  result.conditions_satisfied = conditions.satisfied;
  result.conditions_residual = conditions.max_residual;
  if (!conditions.satisfied) {
    result.notes =
        "uncorrelation conditions violated; the recursion is not the best "
        "linear filter for this model";
    return result;
  }

  const int k_max = std::min(model.horizon, 6);
  try {
    const TrajectorySimulator simulator(model);
    const Trajectory traj =
        scenario.x1_override
            ? simulator.simulate(*scenario.x1_override, scenario.seed)
            : simulator.simulate_from_prior(scenario.seed);
    const std::vector<FilterState> states = run_lckf(
        model, traj.measurements, scenario.schedule, scenario.init);

    double max_rel = 0.0;
    for (int k = 1; k <= k_max; ++k) {
      const StackedModel stacked = build_stacked(model, k);
      const StackedConstraint constraint =
          compile_schedule(scenario.schedule, model, k);
      const BatchSolution batch = batch_lcllmse(
          stacked.Cx, stacked.Cxy, stacked.Cy, constraint.Lambda,
          constraint.Gamma, model.condition_limit);
      const Eigen::VectorXd x_batch =
          apply_batch(stacked, batch, stack_measurements(traj, k));
      const FilterState& state = states[static_cast<size_t>(k) - 1];
      max_rel = std::max(max_rel, (state.x_hat - x_batch).norm() /
                                      (1.0 + x_batch.norm()));
      max_rel = std::max(max_rel,
                         (state.P - batch.P).norm() / (1.0 + batch.P.norm()));
    }
    result.equivalence_checked = true;
    result.equivalence_max_rel_err = max_rel;
    result.equivalence_passed = max_rel <= 1e-8;
  } catch (const Error& e) {
    result.notes = e.what();
  }
  return result;
}

}  // namespace lckf
