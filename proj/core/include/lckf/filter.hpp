#ifndef LCKF_FILTER_HPP
#define LCKF_FILTER_HPP

#include <Eigen/Dense>
#include <vector>

#include "lckf/constraints.hpp"
#include "lckf/model.hpp"

namespace lckf {

enum class FilterKind { kKf, kLmvdrf, kLckf, kLcmve };
const char* to_string(FilterKind kind);

/// Posterior at step k. Gains are stored as state-formers W (measurement by
/// state) and applied as W^T y throughout, so there is exactly one gain
/// orientation in the codebase.
struct FilterState {
  int k = 0;
  Eigen::VectorXd x_hat;    // x_hat_{k|k}
  Eigen::MatrixXd P;        // P_{k|k}, symmetric PSD
  Eigen::MatrixXd W_last;   // corrector state-former at this step
  double constraint_residual = 0.0;
  FilterKind mode = FilterKind::kKf;
};

struct PredictedState {
  Eigen::VectorXd x_pred;  // x_hat_{k|k-1}
  Eigen::MatrixXd P_pred;  // P_{k|k-1}
};

struct Innovation {
  Eigen::VectorXd eps;  // y_k - H_k x_hat_{k|k-1}
  Eigen::MatrixXd S;    // innovation covariance
};

/// Prior start: state at k = 0 holding (x0_mean, Cx0). The k = 1 prediction
/// from it is the identity.
FilterState init_prior(const LdssModel& model);

/// Start at k = 1 from the first measurement alone, treating x_1 as a
/// deterministic unknown:
///   P_{1|1} = (H_1^T Cv_1^{-1} H_1)^{-1},
///   W_1 = Cv_1^{-1} H_1 P_{1|1},   x_hat_{1|1} = W_1^T y_1.
FilterState init_fisher(const LdssModel& model, const Eigen::VectorXd& y1);

/// Fisher-style start under a complete step-1 constraint set
/// W_1^T Delta1 = T1, minimizing W^T Cv_1 W. The constraint must enforce the
/// distortionless response W_1^T H_1 = I (checked); plain init_fisher is the
/// (H_1, I) case.
FilterState init_fisher_constrained(const LdssModel& model,
                                    const Eigen::VectorXd& y1,
                                    const Eigen::MatrixXd& Delta1,
                                    const Eigen::MatrixXd& T1);

/// Fictitious-observation start for the regularized least-squares problem:
/// a k = 0 state with x_hat = c and P = Sigma, from which the static-regime
/// recursion continues. Sigma must be symmetric and invertible.
FilterState rwlse_augment(const LdssModel& model, const Eigen::MatrixXd& Sigma,
                          const Eigen::VectorXd& c);

/// Time update to step k (requires state.k == k-1):
///   x_pred = F_{k-1} x_hat,
///   P_pred = F P F^T + Cw + F C(x,w) + C(w,x) F^T.
/// k = 1 is the identity step from the prior.
PredictedState predict(const FilterState& state, const LdssModel& model,
                       int k);

Innovation innovation(const PredictedState& pred, const LdssModel& model,
                      int k, const Eigen::VectorXd& y);

/// Unconstrained measurement update with cross-covariance terms:
///   S = H P- H^T + Cv + H C(v,x)^T + C(v,x) H^T,
///   W = S^{-1} (H P- + C(v,x)),
///   P = (I - W^T H) P- - W^T C(v,x).
FilterState update_kf(const PredictedState& pred, const LdssModel& model,
                      int k, const Eigen::VectorXd& y);

/// Constrained measurement update: the corrector gain solves
///   min MSE  s.t.  W^T Delta = T,
/// giving W = W_free + S^{-1} Delta (Delta^T S^{-1} Delta)^{-1}
/// (T - W_free^T Delta)^T and the covariance the free update plus the
/// corresponding Gram term. Delta needs full column rank and fewer columns
/// than measurements.
FilterState update_lckf(const PredictedState& pred, const LdssModel& model,
                        int k, const Eigen::VectorXd& y,
                        const Eigen::MatrixXd& Delta,
                        const Eigen::MatrixXd& T);

/// Stabilized evaluation of the posterior covariance at an arbitrary gain:
///   (I - W^T H) P- (I - W^T H)^T - (I - W^T H) C(x,v) W - W^T C(x,v)^T
///   (I - W^T H)^T + W^T Cv W.
/// Agrees with the closed-form update at the optimal gain; used as a
/// cross-check.
Eigen::MatrixXd joseph_covariance(const PredictedState& pred,
                                  const LdssModel& model, int k,
                                  const Eigen::MatrixXd& W);

enum class InitKind { kPrior, kFisher, kRwlse };
const char* to_string(InitKind kind);

struct InitSpec {
  InitKind kind = InitKind::kPrior;
  Eigen::MatrixXd Sigma;  // rwlse only
  Eigen::VectorXd c;      // rwlse only
};

/// Measurement-independent part of a filter run: per-step state-formers,
/// covariances and constraint residuals. Computing the plan once and
/// applying it per trial is what keeps Monte Carlo runs cheap; a plan is
/// immutable and safe to share across threads.
struct FilterPlan {
  FilterKind kind = FilterKind::kKf;
  InitKind init = InitKind::kPrior;
  Eigen::VectorXd x0;                       // prior mean / rwlse c
  std::vector<Eigen::MatrixXd> W;           // steps 1..K
  std::vector<Eigen::MatrixXd> P;           // steps 1..K
  std::vector<double> constraint_residual;  // steps 1..K
};

FilterPlan make_plan(const LdssModel& model, const ConstraintSchedule& schedule,
                     const InitSpec& init, FilterKind kind);

/// Runs a plan over one measurement sequence, returning x_hat_{k|k} per step.
std::vector<Eigen::VectorXd> apply_plan(
    const FilterPlan& plan, const LdssModel& model,
    const std::vector<Eigen::VectorXd>& measurements);

/// Full constrained run; the schedule's families decide which steps carry
/// gain constraints (C3 steps correct with the unconstrained form).
std::vector<FilterState> run_lckf(const LdssModel& model,
                                  const std::vector<Eigen::VectorXd>& ys,
                                  const ConstraintSchedule& schedule,
                                  const InitSpec& init,
                                  FilterKind kind = FilterKind::kLckf);

std::vector<FilterState> run_kf(const LdssModel& model,
                                const std::vector<Eigen::VectorXd>& ys);

std::vector<FilterState> run_lmvdrf(const LdssModel& model,
                                    const std::vector<Eigen::VectorXd>& ys);

/// Static-regime recursion (all F = I, w = 0, white measurement noise).
/// The first overload starts from the measurement alone (Fisher), the second
/// continues from a rwlse_augment state.
std::vector<FilterState> run_lcmve(const LdssModel& model,
                                   const std::vector<Eigen::VectorXd>& ys,
                                   const ConstraintSchedule& schedule);
std::vector<FilterState> run_lcmve(const LdssModel& model,
                                   const std::vector<Eigen::VectorXd>& ys,
                                   const ConstraintSchedule& schedule,
                                   const FilterState& init);

/// Throws ErrorCode::kRegime unless the model is static and noise-free in
/// the state equation.
void require_static_regime(const LdssModel& model);

}  // namespace lckf

#endif  // LCKF_FILTER_HPP
