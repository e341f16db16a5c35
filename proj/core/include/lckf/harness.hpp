#ifndef LCKF_HARNESS_HPP
#define LCKF_HARNESS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lckf/filter.hpp"

namespace lckf {

/// One seeded Monte Carlo experiment: a model, the constraint schedule and
/// initialization defining the filter under study, and the trial plan.
/// Trial t draws with seed base_seed + t; when x1_override is set the
/// initial state is fixed (distortionless studies), otherwise it is drawn
/// from the prior.
struct Scenario {
  LdssModel model;
  ConstraintSchedule schedule;
  InitSpec init;
  int trials = 1;
  std::uint64_t seed = 0;
  std::optional<Eigen::VectorXd> x1_override;
};

struct StepStats {
  Eigen::MatrixXd theoretical_P;   // the filter's own P_{k|k}
  Eigen::MatrixXd empirical_mse;   // mean of e e^T over trials
  Eigen::VectorXd bias;            // mean of e over trials
  double constraint_residual = 0.0;
  double theo_trace = 0.0;
  double emp_trace = 0.0;
  double bias_norm = 0.0;
};

struct FilterReport {
  std::string name;
  FilterKind kind = FilterKind::kKf;
  InitKind init = InitKind::kPrior;
  int lambda_rows = 0;  // expanded stacked-constraint dimensions at k = K
  int lambda_cols = 0;
  std::vector<StepStats> steps;
};

struct RunReport {
  std::uint64_t seed = 0;
  int trials = 0;
  int horizon = 0;
  std::vector<FilterReport> filters;
  /// Per step, the matrix of cross second moments of the per-trial squared
  /// error norms: sq_err_cross[k](i, j) = mean of |e_i|^2 |e_j|^2. Together
  /// with emp_trace this gives mean and variance of any paired difference
  /// |e_i|^2 - |e_j|^2 without fixing a baseline filter.
  std::vector<Eigen::MatrixXd> sq_err_cross;
  double elapsed_seconds = 0.0;  // informational; never serialized
};

/// Names understood by the filter registry: "kf", "lmvdrf", "lckf",
/// "lclmvdrf", "lcmve". "lckf" (and "lcmve") run the scenario's own schedule
/// and init; the others ignore them.
FilterPlan make_named_plan(const Scenario& scenario, const std::string& name,
                           FilterReport* info = nullptr);

/// Runs the scenario's own filter over `trials` seeded trials. Deterministic
/// given (seed, trials) regardless of the thread count; the environment
/// variable LCKF_LAB_THREADS caps trial parallelism.
RunReport run_trials(const Scenario& scenario);

/// Paired-seed comparison: every trial feeds the identical trajectory to all
/// filters, so ordering statistics are low-variance.
RunReport compare_filters(const Scenario& scenario,
                          const std::vector<std::string>& filter_names);

struct DistortionlessReport {
  bool passed = false;
  double max_error_difference = 0.0;
  double tolerance = 1e-9;
};

/// Runs the scenario's filter twice per trial with identical noise and
/// initial states x1_a / x1_b; passes iff the per-step error trajectories
/// agree within tolerance. A distortionless filter passes by construction, a
/// prior-matched one does not.
DistortionlessReport distortionless_check(const Scenario& scenario,
                                          const Eigen::VectorXd& x1_a,
                                          const Eigen::VectorXd& x1_b);

/// Trial parallelism after applying the LCKF_LAB_THREADS cap.
int harness_thread_count();

/// Well-conditioned 2-state rotation / 3-measurement scenario used by the
/// statistical checks.
Scenario make_reference_scenario(int horizon = 8, int trials = 100000,
                                 std::uint64_t seed = 20240901);

}  // namespace lckf

#endif  // LCKF_HARNESS_HPP
