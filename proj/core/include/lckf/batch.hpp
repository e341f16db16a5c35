#ifndef LCKF_BATCH_HPP
#define LCKF_BATCH_HPP

#include <Eigen/Dense>
#include <vector>

#include "lckf/model.hpp"

namespace lckf {

/// Horizon-stacked observation model  ybar_k = A_bar x_1 + n_bar with exact
/// second-order statistics. Everything here is derived from the model's
/// joint elementary covariance, so cross-correlated noise is handled without
/// approximation. Intended for desk-scale horizons; the stacked dimension
/// grows linearly in k.
struct StackedModel {
  int k = 0;
  Eigen::MatrixXd A_bar;  // sum(N_l) x P_1, rows H_l B(l,1)
  Eigen::MatrixXd Cy;     // covariance of ybar_k
  Eigen::MatrixXd Cn;     // covariance of nbar_k
  Eigen::MatrixXd Cxy;    // C(x_k, ybar_k)
  Eigen::MatrixXd Cx;     // covariance of x_k
  Eigen::MatrixXd G;      // noise accumulation: x_k = B(k,1) x_1 + G wbar
  Eigen::VectorXd y_mean; // E[ybar_k] = A_bar x0_mean
  Eigen::VectorXd x_mean; // E[x_k]    = B(k,1) x0_mean
};

StackedModel build_stacked(const LdssModel& model, int k);

/// Residuals of the conditions under which the predictor/corrector
/// recursion is the exact best linear filter: for every step j >= 2,
/// C(w_{j-1}, ybar_{j-1}) = 0 and C(v_j, ybar_{j-1}) = 0. Computed exactly
/// from the elementary covariance.
struct UncorrelationReport {
  std::vector<double> w_residual;  // steps j = 2..k, max |entry|
  std::vector<double> v_residual;
  double max_residual = 0.0;
  bool satisfied = false;  // max residual below 1e-10 * (1 + noise scale)
};

UncorrelationReport uncorrelation_condition_residuals(const LdssModel& model,
                                                      int k);

/// A linear state-former W applied as W^T y, with its error covariance and
/// the achieved constraint residual.
struct BatchSolution {
  Eigen::MatrixXd W;  // dim(y) x dim(x)
  Eigen::MatrixXd P;  // dim(x) x dim(x), symmetric PSD
  double constraint_residual = 0.0;  // ||W^T Lambda - T||_F
};

/// Best unconstrained linear estimator of x from y:
///   W = Cy^{-1} Cyx,  P = Cx - Cxy Cy^{-1} Cxy^T.
BatchSolution batch_llmse(const Eigen::MatrixXd& Cx,
                          const Eigen::MatrixXd& Cxy,
                          const Eigen::MatrixXd& Cy,
                          double condition_limit = 1e8);

/// Best linear estimator subject to W^T Lambda = T. An empty Lambda reduces
/// exactly to batch_llmse. Lambda must have full column rank.
BatchSolution batch_lcllmse(const Eigen::MatrixXd& Cx,
                            const Eigen::MatrixXd& Cxy,
                            const Eigen::MatrixXd& Cy,
                            const Eigen::MatrixXd& Lambda,
                            const Eigen::MatrixXd& T,
                            double condition_limit = 1e8);

/// Distortionless batch filter: batch_lcllmse on the stacked model with
/// Lambda = A_bar and T = B(k,1). Requires H_1 full column rank.
BatchSolution batch_lmvdr(const LdssModel& model, int k);

/// Independent reference solve for the same equality-constrained problem,
/// assembling the system [2 Cy, Lambda; Lambda^T, 0] column-by-column and
/// solving it with a dense pivoted LU. Kept algebraically distinct from
/// batch_lcllmse on purpose; tests cross-check the two.
BatchSolution kkt_reference(const Eigen::MatrixXd& Cx,
                            const Eigen::MatrixXd& Cxy,
                            const Eigen::MatrixXd& Cy,
                            const Eigen::MatrixXd& Lambda,
                            const Eigen::MatrixXd& T);

/// Applies a batch state-former: x_hat = x_mean + W^T (ybar - y_mean).
Eigen::VectorXd apply_batch(const StackedModel& stacked,
                            const BatchSolution& solution,
                            const Eigen::VectorXd& ybar);

/// Stacks y_1..y_k of a trajectory into one vector.
Eigen::VectorXd stack_measurements(const Trajectory& traj, int k);

}  // namespace lckf

#endif  // LCKF_BATCH_HPP
