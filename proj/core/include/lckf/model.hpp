#ifndef LCKF_MODEL_HPP
#define LCKF_MODEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "lckf/errors.hpp"

namespace lckf {

/// Time-varying linear discrete state-space model on a finite horizon K:
///
///   x_{k+1} = F_k x_k + w_k        k = 1..K-1
///   y_k     = H_k x_k + v_k        k = 1..K
///
/// The first state carries the prior (x0_mean, Cx0); there is no transition
/// before it, so a filter's k=0 -> k=1 prediction is the identity. Noise is
/// zero mean and temporally white with per-step covariances Cw_k, Cv_k.
///
/// Two optional cross-covariance sequences extend the white structure:
///   Cvx[k] = C(v_k, x_k), realized as the one-lag cross C(w_{k-1}, v_k)
///            for k >= 2 and as a direct (v_1, x_1) cross at k = 1;
///   Cwx[k] = C(w_k, x_k), realized as one-lag state-noise colour
///            C(w_k, w_{k-1}) for k >= 2 and a direct (w_1, x_1) cross at
///            k = 1.
/// Cvx keeps the measurement sequence inside the family whose best linear
/// filter is the standard predictor/corrector recursion; Cwx generally does
/// not (`uncorrelation_condition_residuals` in batch.hpp measures this).
///
/// Steps are addressed with the same 1-based indices used above. Models are
/// immutable after construction and safe to share across threads.
struct LdssModel {
  int horizon = 0;                   // K
  std::vector<Eigen::MatrixXd> F;    // K-1 entries; F[k-1] maps x_k to x_{k+1}
  std::vector<Eigen::MatrixXd> H;    // K entries
  std::vector<Eigen::MatrixXd> Cw;   // K-1 entries
  std::vector<Eigen::MatrixXd> Cv;   // K entries
  std::vector<Eigen::MatrixXd> Cwx;  // empty, or K-1 entries C(w_k, x_k)
  std::vector<Eigen::MatrixXd> Cvx;  // empty, or K entries C(v_k, x_k)
  Eigen::VectorXd x0_mean;           // prior mean of x_1
  Eigen::MatrixXd Cx0;               // prior covariance of x_1
  double condition_limit = 1e8;      // guard for every symmetric solve

  int state_dim(int k) const;  // P_k
  int meas_dim(int k) const;   // N_k

  const Eigen::MatrixXd& transition(int k) const;        // F_k, k in 1..K-1
  const Eigen::MatrixXd& measurement(int k) const;       // H_k, k in 1..K
  const Eigen::MatrixXd& state_noise_cov(int k) const;   // Cw_k
  const Eigen::MatrixXd& meas_noise_cov(int k) const;    // Cv_k
  Eigen::MatrixXd state_noise_state_cross(int k) const;  // C(w_k, x_k)
  Eigen::MatrixXd meas_noise_state_cross(int k) const;   // C(v_k, x_k)
  bool has_state_noise_cross(int k) const;
  bool has_meas_noise_cross(int k) const;
};

/// Broadcasts a single set of time-invariant matrices across the horizon.
LdssModel make_time_invariant_model(int horizon, const Eigen::MatrixXd& F,
                                    const Eigen::MatrixXd& H,
                                    const Eigen::MatrixXd& Cw,
                                    const Eigen::MatrixXd& Cv,
                                    const Eigen::VectorXd& x0_mean,
                                    const Eigen::MatrixXd& Cx0);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_passed() const;
  std::string summary() const;
};

/// Per-check report: PSD of every covariance (including the joint elementary
/// covariance when cross terms are present), dimension chain, finiteness.
/// Never throws; failures are rows in the report.
ValidationReport validate_model(const LdssModel& model);

/// Throws ErrorCode::kModel when validate_model reports any failure.
void require_valid(const LdssModel& model);

/// Transition product B(k,l): F_{k-1} F_{k-2} ... F_l for k > l, the P_k
/// identity for k == l, and the P_k x P_l zero matrix for k < l.
Eigen::MatrixXd transition_product(const LdssModel& model, int k, int l);

/// Joint second-order description of the elementary random vector
/// zeta = (x_1, w_1..w_{K'-1}, v_1..v_K') for a horizon prefix K'. All
/// stacked statistics and simulations reduce to linear maps of zeta, so its
/// covariance is the single source of truth for the model's correlation
/// structure.
struct JointSecondOrder {
  Eigen::MatrixXd cov;
  int x1_offset = 0;
  int x1_dim = 0;
  std::vector<int> w_offset, w_dim;  // K'-1 entries
  std::vector<int> v_offset, v_dim;  // K' entries
  int total_dim = 0;
};

JointSecondOrder joint_second_order(const LdssModel& model, int horizon);

struct Trajectory {
  std::vector<Eigen::VectorXd> states;        // x_1..x_K
  std::vector<Eigen::VectorXd> measurements;  // y_1..y_K
  std::uint64_t seed = 0;
};

/// Seeded Gaussian trajectory sampler. The joint noise factor is computed
/// once at construction; each draw is a matrix-vector product, so a
/// simulator instance can be shared (const) across concurrent trials.
class TrajectorySimulator {
 public:
  explicit TrajectorySimulator(const LdssModel& model);

  /// Trajectory from a fixed initial state; identical (x1, seed) pairs give
  /// bitwise-identical trajectories, and the noise realization depends on the
  /// seed only. Requires the model to have no (w_1,x_1)/(v_1,x_1) cross.
  Trajectory simulate(const Eigen::VectorXd& x1, std::uint64_t seed) const;

  /// Draws x_1 from the prior jointly with the noises (honouring any
  /// elementary cross terms) and returns the resulting trajectory.
  Trajectory simulate_from_prior(std::uint64_t seed) const;

 private:
  Trajectory propagate(const Eigen::VectorXd& x1, const Eigen::VectorXd& eta,
                       std::uint64_t seed) const;

  const LdssModel* model_;
  JointSecondOrder joint_;
  Eigen::MatrixXd noise_factor_;  // square root of the (w, v) block
  Eigen::MatrixXd joint_factor_;  // square root of the full zeta covariance
  bool has_x1_cross_ = false;
};

Trajectory simulate_trajectory(const LdssModel& model,
                               const Eigen::VectorXd& x1, std::uint64_t seed);

}  // namespace lckf

#endif  // LCKF_MODEL_HPP
