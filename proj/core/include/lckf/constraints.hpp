#ifndef LCKF_CONSTRAINTS_HPP
#define LCKF_CONSTRAINTS_HPP

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "lckf/model.hpp"

namespace lckf {

/// How a step's gain constraint relates to the constraints already in force.
///
///   kNone : no constraint; only legal while none is active.
///   kC2   : fresh constraint W_k^T Delta_k = T_k on top of an unconstrained
///           history; activates constraint propagation.
///   kC3   : propagate the active constraint, no new one. The corrector gain
///           itself is unconstrained at such a step.
///   kC1   : propagate and add a new (Delta_k, T_k) block.
enum class ConstraintFamily { kNone, kC2, kC3, kC1 };

const char* to_string(ConstraintFamily family);

struct StepConstraint {
  ConstraintFamily family = ConstraintFamily::kNone;
  Eigen::MatrixXd Delta;  // N_k x M_k, full column rank, M_k < N_k
  Eigen::MatrixXd T;      // P_k x M_k

  bool has_gain_constraint() const {
    return (family == ConstraintFamily::kC1 ||
            family == ConstraintFamily::kC2) &&
           Delta.cols() > 0;
  }
};

StepConstraint no_constraint();
StepConstraint new_constraint(ConstraintFamily family, Eigen::MatrixXd Delta,
                              Eigen::MatrixXd T);

/// Per-step constraint records for k = 1..K. steps[0] is the initial-step
/// constraint applied inside the k = 1 update (family kC2 or kNone); for a
/// distortionless run it must contain the full k = 1 constraint set,
/// including the (H_1, I) columns.
struct ConstraintSchedule {
  std::vector<StepConstraint> steps;

  const StepConstraint& at(int k) const;  // 1-based
  int horizon() const { return static_cast<int>(steps.size()); }
  bool empty() const;  // no gain constraint anywhere
};

ConstraintSchedule empty_schedule(int horizon);

/// The distortionless preset: step 1 carries (H_1, I), every later step
/// propagates it (kC3).
ConstraintSchedule lmvdrf_schedule(const LdssModel& model);

/// Checks family sequencing, per-step rank and the M_k < N_k freedom
/// requirement, over steps 1..through (the full horizon when through < 0).
/// Throws kSchedule / kConstraint / kDegreesOfFreedom.
void validate_schedule(const ConstraintSchedule& schedule,
                       const LdssModel& model, int through = -1);

/// Equivalent stacked constraint pair: the batch problem
///   min P(Wbar) s.t. Wbar^T Lambda_k = Gamma_k
/// whose solution the step-by-step constrained recursion must reproduce.
struct StackedConstraint {
  Eigen::MatrixXd Lambda;  // sum(N_l) x M
  Eigen::MatrixXd Gamma;   // P_k x M
};

StackedConstraint compile_schedule(const ConstraintSchedule& schedule,
                                   const LdssModel& model, int k);

/// Constraint that nulls the gain's response to first-order parametric
/// modelling error: Delta_k = [dH-block, H_hat * dF-block], T_k = 0.
/// dH[p] holds the Jacobian of the p-th column of H_k with respect to the
/// measurement parameters, dF[p] likewise for the transition parameters.
/// Identically-zero columns are vacuous and dropped; if nothing remains the
/// result is kNone.
StepConstraint jacobian_constraints(const Eigen::MatrixXd& H_hat,
                                    const std::vector<Eigen::MatrixXd>& dH,
                                    const std::vector<Eigen::MatrixXd>& dF);

/// Constraint nulling structured uncertainty dF = A1 B C, dH = A2 B C:
/// Delta = [A2, H * A1], T = 0. Requires N_k > rank(Delta) and Delta full
/// column rank (after dropping zero columns).
StepConstraint structured_uncertainty_constraints(const Eigen::MatrixXd& A1,
                                                  const Eigen::MatrixXd& A2,
                                                  const Eigen::MatrixXd& H);

struct GainConstraintReport {
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

/// Post-hoc check of ||W^T Delta - T||_F against 1e-10 * (1 + ||T||_F).
GainConstraintReport verify_gain_constraint(const Eigen::MatrixXd& W,
                                            const StepConstraint& constraint);

/// Widens the step-1 constraint to W_1^T [Delta_1, H_1] = [T_1, I] and turns
/// later steps into propagating families, producing a distortionless
/// constrained schedule (run it with the Fisher-style initialization).
ConstraintSchedule lckf_to_lclmvdrf(const ConstraintSchedule& schedule,
                                    const LdssModel& model);

/// Central-difference Jacobians of each column of a parametric matrix, with
/// step 1e-6 * (1 + |param_i|) per coordinate. Result[p] has one column per
/// parameter coordinate.
using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
std::vector<Eigen::MatrixXd> column_jacobians(const MatrixFn& fn,
                                              const Eigen::VectorXd& param);

}  // namespace lckf

#endif  // LCKF_CONSTRAINTS_HPP
