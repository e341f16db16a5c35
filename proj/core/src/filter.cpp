#include "lckf/filter.hpp"

#include <cassert>
#include <string>

#include "lckf/linalg.hpp"

namespace lckf {

const char* to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::kKf: return "kf";
    case FilterKind::kLmvdrf: return "lmvdrf";
    case FilterKind::kLckf: return "lckf";
    case FilterKind::kLcmve: return "lcmve";
  }
  return "?";
}

const char* to_string(InitKind kind) {
  switch (kind) {
    case InitKind::kPrior: return "prior";
    case InitKind::kFisher: return "fisher";
    case InitKind::kRwlse: return "rwlse";
  }
  return "?";
}

FilterState init_prior(const LdssModel& model) {
  FilterState state;
  state.k = 0;
  state.x_hat = model.x0_mean;
  state.P = model.Cx0;
  return state;
}

namespace {

// Minimum-noise-power state-former at k = 1 under the complete constraint
// set W^T Delta = T: W = Cv^{-1} Delta (Delta^T Cv^{-1} Delta)^{-1} T^T,
// P = T (Delta^T Cv^{-1} Delta)^{-1} T^T.
FilterState fisher_core(const LdssModel& model, const Eigen::VectorXd& y1,
                        const Eigen::MatrixXd& Delta,
                        const Eigen::MatrixXd& T) {
  const Eigen::MatrixXd& H1 = model.measurement(1);
  const int n1 = model.meas_dim(1);
  const int p1 = model.state_dim(1);
  if (y1.size() != n1) {
    throw Error(ErrorCode::kModel, "y_1 has wrong dimension");
  }
  if (Delta.rows() != n1 || T.rows() != p1 || T.cols() != Delta.cols()) {
    throw Error(ErrorCode::kInitialization,
                "step-1 constraint has wrong shape");
  }
  if (Delta.cols() > n1 || !linalg::has_full_column_rank(Delta)) {
    throw Error(ErrorCode::kInitialization,
                "step-1 constraint matrix is rank deficient or too wide");
  }

  linalg::SpdSolver cv(model.meas_noise_cov(1), model.condition_limit);
  const Eigen::MatrixXd cv_inv_delta = cv.solve(Delta);
  linalg::SpdSolver gram(Delta.transpose() * cv_inv_delta,
                         model.condition_limit);

  FilterState state;
  state.k = 1;
  state.W_last = cv_inv_delta * gram.solve(Eigen::MatrixXd(T.transpose()));
  state.P = linalg::symmetrize(T * gram.solve(Eigen::MatrixXd(T.transpose())));
  state.x_hat = state.W_last.transpose() * y1;
  state.constraint_residual =
      (state.W_last.transpose() * Delta - T).norm();

  // A start from the measurement alone is only meaningful when the gain
  // reproduces the state exactly in the noiseless limit.
  const Eigen::MatrixXd response = state.W_last.transpose() * H1;
  if ((response - Eigen::MatrixXd::Identity(p1, p1)).norm() >
      1e-8 * (1.0 + response.norm())) {
    throw Error(ErrorCode::kInitialization,
                "step-1 constraint does not enforce the distortionless "
                "response W_1^T H_1 = I");
  }
  return state;
}

}  // namespace

FilterState init_fisher(const LdssModel& model, const Eigen::VectorXd& y1) {
  const Eigen::MatrixXd& H1 = model.measurement(1);
  if (!linalg::has_full_column_rank(H1)) {
    throw Error(ErrorCode::kInitialization, "H_1 is not full column rank");
  }
  const int p1 = model.state_dim(1);
  FilterState state = fisher_core(model, y1, H1,
                                  Eigen::MatrixXd::Identity(p1, p1));
  state.constraint_residual = 0.0;  // the (H_1, I) set is the init itself
  return state;
}

FilterState init_fisher_constrained(const LdssModel& model,
                                    const Eigen::VectorXd& y1,
                                    const Eigen::MatrixXd& Delta1,
                                    const Eigen::MatrixXd& T1) {
  return fisher_core(model, y1, Delta1, T1);
}

FilterState rwlse_augment(const LdssModel& model, const Eigen::MatrixXd& Sigma,
                          const Eigen::VectorXd& c) {
  const int p1 = model.state_dim(1);
  if (Sigma.rows() != p1 || Sigma.cols() != p1 || c.size() != p1) {
    throw Error(ErrorCode::kStatistics,
                "fictitious observation has wrong dimension");
  }
  if ((Sigma - Sigma.transpose()).norm() > 1e-10 * (1.0 + Sigma.norm())) {
    throw Error(ErrorCode::kStatistics, "Sigma is not symmetric");
  }
  // Must be invertible so the fictitious observation y_0 = x_1 + v_0,
  // C(v_0) = Sigma, is well posed.
  linalg::SpdSolver check(Sigma, model.condition_limit);
  (void)check;

  FilterState state;
  state.k = 0;
  state.x_hat = c;
  state.P = Sigma;
  state.mode = FilterKind::kLcmve;
  return state;
}

PredictedState predict(const FilterState& state, const LdssModel& model,
                       int k) {
  if (state.k != k - 1) {
    throw Error(ErrorCode::kModel,
                "predict to step " + std::to_string(k) +
                    " from a state at step " + std::to_string(state.k));
  }
  if (k == 1) {
    return PredictedState{state.x_hat, state.P};
  }
  const Eigen::MatrixXd& F = model.transition(k - 1);
  if (F.cols() != state.x_hat.size()) {
    throw Error(ErrorCode::kModel,
                "transition dimension mismatch at step " + std::to_string(k));
  }
  PredictedState pred;
  pred.x_pred = F * state.x_hat;
  pred.P_pred = F * state.P * F.transpose() + model.state_noise_cov(k - 1);
  if (model.has_state_noise_cross(k - 1)) {
    const Eigen::MatrixXd cross = model.state_noise_state_cross(k - 1);
    pred.P_pred += F * cross.transpose() + cross * F.transpose();
  }
  pred.P_pred = linalg::symmetrize(pred.P_pred);
  return pred;
}

Innovation innovation(const PredictedState& pred, const LdssModel& model,
                      int k, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd& H = model.measurement(k);
  Innovation innov;
  innov.eps = y - H * pred.x_pred;
  innov.S = H * pred.P_pred * H.transpose() + model.meas_noise_cov(k);
  if (model.has_meas_noise_cross(k)) {
    const Eigen::MatrixXd cross = model.meas_noise_state_cross(k);
    innov.S += H * cross.transpose() + cross * H.transpose();
  }
  innov.S = linalg::symmetrize(innov.S);
  return innov;
}

namespace {

struct CorrectorGain {
  Eigen::MatrixXd W;
  Eigen::MatrixXd P;
  double constraint_residual = 0.0;
};

CorrectorGain corrector_gain(const PredictedState& pred,
                             const LdssModel& model, int k,
                             const Eigen::MatrixXd* Delta,
                             const Eigen::MatrixXd* T) {
  const Eigen::MatrixXd& H = model.measurement(k);
  const int n = model.meas_dim(k);
  const Eigen::MatrixXd cross = model.meas_noise_state_cross(k);

  Eigen::MatrixXd S = H * pred.P_pred * H.transpose() +
                      model.meas_noise_cov(k) + H * cross.transpose() +
                      cross * H.transpose();
  S = linalg::symmetrize(S);
  linalg::SpdSolver s_solver(S, model.condition_limit);

  CorrectorGain gain;
  const Eigen::MatrixXd W_free =
      s_solver.solve(Eigen::MatrixXd(H * pred.P_pred + cross));
  gain.W = W_free;
  gain.P = linalg::symmetrize(pred.P_pred -
                              W_free.transpose() * (H * pred.P_pred) -
                              W_free.transpose() * cross);

  if (Delta != nullptr && Delta->cols() > 0) {
    if (Delta->rows() != n) {
      throw Error(ErrorCode::kConstraint,
                  "Delta_" + std::to_string(k) + " has wrong row count");
    }
    if (Delta->cols() >= n) {
      throw Error(ErrorCode::kDegreesOfFreedom,
                  "constraint at step " + std::to_string(k) +
                      " leaves the gain no freedom");
    }
    if (!linalg::has_full_column_rank(*Delta)) {
      throw Error(ErrorCode::kConstraint,
                  "Delta_" + std::to_string(k) + " is column-rank deficient");
    }
    if (T->rows() != pred.x_pred.size() || T->cols() != Delta->cols()) {
      throw Error(ErrorCode::kConstraint,
                  "T_" + std::to_string(k) + " has wrong shape");
    }
    const Eigen::MatrixXd s_inv_delta = s_solver.solve(*Delta);
    linalg::SpdSolver gram(Delta->transpose() * s_inv_delta,
                           model.condition_limit);
    const Eigen::MatrixXd deficit =
        T->transpose() - Delta->transpose() * W_free;
    gain.W += s_inv_delta * gram.solve(deficit);
    gain.P = linalg::symmetrize(gain.P +
                                deficit.transpose() * gram.solve(deficit));
    gain.constraint_residual =
        (gain.W.transpose() * *Delta - *T).norm();
  }

#ifndef NDEBUG
  {
    // The closed-form posterior must agree with the stabilized evaluation of
    // the MSE at the returned gain.
    const Eigen::MatrixXd joseph = joseph_covariance(pred, model, k, gain.W);
    assert((gain.P - joseph).norm() <= 1e-9 * (1.0 + joseph.norm()));
  }
#endif
  return gain;
}

FilterState make_posterior(const PredictedState& pred, const LdssModel& model,
                           int k, const Eigen::VectorXd& y,
                           CorrectorGain gain) {
  const Eigen::MatrixXd& H = model.measurement(k);
  if (y.size() != H.rows()) {
    throw Error(ErrorCode::kModel, "y_" + std::to_string(k) +
                                       " has wrong dimension");
  }
  FilterState state;
  state.k = k;
  state.x_hat = pred.x_pred + gain.W.transpose() * (y - H * pred.x_pred);
  state.P = std::move(gain.P);
  state.W_last = std::move(gain.W);
  state.constraint_residual = gain.constraint_residual;
  return state;
}

}  // namespace

FilterState update_kf(const PredictedState& pred, const LdssModel& model,
                      int k, const Eigen::VectorXd& y) {
  return make_posterior(pred, model, k, y,
                        corrector_gain(pred, model, k, nullptr, nullptr));
}

FilterState update_lckf(const PredictedState& pred, const LdssModel& model,
                        int k, const Eigen::VectorXd& y,
                        const Eigen::MatrixXd& Delta,
                        const Eigen::MatrixXd& T) {
  FilterState state = make_posterior(
      pred, model, k, y, corrector_gain(pred, model, k, &Delta, &T));
  state.mode = FilterKind::kLckf;
  return state;
}

Eigen::MatrixXd joseph_covariance(const PredictedState& pred,
                                  const LdssModel& model, int k,
                                  const Eigen::MatrixXd& W) {
  const Eigen::MatrixXd& H = model.measurement(k);
  const int p = static_cast<int>(pred.x_pred.size());
  const Eigen::MatrixXd xv = model.meas_noise_state_cross(k).transpose();
  const Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(p, p) - W.transpose() * H;
  Eigen::MatrixXd cov = a * pred.P_pred * a.transpose() - a * xv * W -
                        W.transpose() * xv.transpose() * a.transpose() +
                        W.transpose() * model.meas_noise_cov(k) * W;
  return linalg::symmetrize(cov);
}

FilterPlan make_plan(const LdssModel& model, const ConstraintSchedule& schedule,
                     const InitSpec& init, FilterKind kind) {
  validate_schedule(schedule, model);
  const int K = model.horizon;

  FilterPlan plan;
  plan.kind = kind;
  plan.init = init.kind;
  plan.W.reserve(static_cast<size_t>(K));
  plan.P.reserve(static_cast<size_t>(K));
  plan.constraint_residual.reserve(static_cast<size_t>(K));

  Eigen::MatrixXd P_prev;
  int first_update = 1;

  switch (init.kind) {
    case InitKind::kPrior: {
      plan.x0 = model.x0_mean;
      P_prev = model.Cx0;
      break;
    }
    case InitKind::kRwlse: {
      const FilterState state = rwlse_augment(model, init.Sigma, init.c);
      plan.x0 = state.x_hat;
      P_prev = state.P;
      break;
    }
    case InitKind::kFisher: {
      const StepConstraint& first = schedule.at(1);
      FilterState state;
      if (first.has_gain_constraint()) {
        // Dummy measurement: only the gain and covariance are needed here.
        const Eigen::VectorXd y0 =
            Eigen::VectorXd::Zero(model.meas_dim(1));
        state = init_fisher_constrained(model, y0, first.Delta, first.T);
      } else {
        state = init_fisher(model, Eigen::VectorXd::Zero(model.meas_dim(1)));
      }
      plan.W.push_back(state.W_last);
      plan.P.push_back(state.P);
      plan.constraint_residual.push_back(state.constraint_residual);
      P_prev = state.P;
      first_update = 2;
      break;
    }
  }

  for (int k = first_update; k <= K; ++k) {
    PredictedState pred;
    if (k == 1) {
      pred.x_pred = plan.x0;
      pred.P_pred = P_prev;
    } else {
      FilterState carrier;
      carrier.k = k - 1;
      carrier.x_hat = Eigen::VectorXd::Zero(model.state_dim(k - 1));
      carrier.P = P_prev;
      pred = predict(carrier, model, k);
    }
    const StepConstraint& c = schedule.at(k);
    CorrectorGain gain =
        c.has_gain_constraint()
            ? corrector_gain(pred, model, k, &c.Delta, &c.T)
            : corrector_gain(pred, model, k, nullptr, nullptr);
    plan.W.push_back(std::move(gain.W));
    plan.P.push_back(gain.P);
    plan.constraint_residual.push_back(gain.constraint_residual);
    P_prev = std::move(gain.P);
  }
  return plan;
}

std::vector<Eigen::VectorXd> apply_plan(
    const FilterPlan& plan, const LdssModel& model,
    const std::vector<Eigen::VectorXd>& measurements) {
  const int K = model.horizon;
  if (static_cast<int>(measurements.size()) < K) {
    throw Error(ErrorCode::kModel, "measurement sequence shorter than horizon");
  }
  std::vector<Eigen::VectorXd> estimates;
  estimates.reserve(static_cast<size_t>(K));

  Eigen::VectorXd x_hat;
  for (int k = 1; k <= K; ++k) {
    const size_t i = static_cast<size_t>(k) - 1;
    const Eigen::VectorXd& y = measurements[i];
    if (k == 1 && plan.init == InitKind::kFisher) {
      x_hat = plan.W[0].transpose() * y;
    } else {
      const Eigen::VectorXd pred =
          (k == 1) ? plan.x0 : model.transition(k - 1) * x_hat;
      x_hat = pred + plan.W[i].transpose() * (y - model.measurement(k) * pred);
    }
    estimates.push_back(x_hat);
  }
  return estimates;
}

std::vector<FilterState> run_lckf(const LdssModel& model,
                                  const std::vector<Eigen::VectorXd>& ys,
                                  const ConstraintSchedule& schedule,
                                  const InitSpec& init, FilterKind kind) {
  const FilterPlan plan = make_plan(model, schedule, init, kind);
  const std::vector<Eigen::VectorXd> estimates =
      apply_plan(plan, model, ys);
  std::vector<FilterState> states;
  states.reserve(estimates.size());
  for (size_t i = 0; i < estimates.size(); ++i) {
    FilterState state;
    state.k = static_cast<int>(i) + 1;
    state.x_hat = estimates[i];
    state.P = plan.P[i];
    state.W_last = plan.W[i];
    state.constraint_residual = plan.constraint_residual[i];
    state.mode = kind;
    states.push_back(std::move(state));
  }
  return states;
}

std::vector<FilterState> run_kf(const LdssModel& model,
                                const std::vector<Eigen::VectorXd>& ys) {
  return run_lckf(model, ys, empty_schedule(model.horizon), InitSpec{},
                  FilterKind::kKf);
}

std::vector<FilterState> run_lmvdrf(const LdssModel& model,
                                    const std::vector<Eigen::VectorXd>& ys) {
  InitSpec init;
  init.kind = InitKind::kFisher;
  return run_lckf(model, ys, lmvdrf_schedule(model), init,
                  FilterKind::kLmvdrf);
}

void require_static_regime(const LdssModel& model) {
  for (int k = 1; k <= model.horizon - 1; ++k) {
    const Eigen::MatrixXd& F = model.transition(k);
    if (F.rows() != F.cols() ||
        !F.isApprox(Eigen::MatrixXd::Identity(F.rows(), F.cols()))) {
      throw Error(ErrorCode::kRegime,
                  "static regime requires F_k = I at every step");
    }
    if (!model.state_noise_cov(k).isZero(0.0)) {
      throw Error(ErrorCode::kRegime,
                  "static regime requires zero state noise");
    }
    if (model.has_state_noise_cross(k)) {
      throw Error(ErrorCode::kRegime,
                  "static regime admits no state-noise cross terms");
    }
  }
  for (int k = 1; k <= model.horizon; ++k) {
    if (model.has_meas_noise_cross(k)) {
      throw Error(ErrorCode::kRegime,
                  "static regime requires temporally white measurement noise");
    }
  }
}

std::vector<FilterState> run_lcmve(const LdssModel& model,
                                   const std::vector<Eigen::VectorXd>& ys,
                                   const ConstraintSchedule& schedule) {
  require_static_regime(model);
  InitSpec init;
  init.kind = InitKind::kFisher;
  return run_lckf(model, ys, schedule, init, FilterKind::kLcmve);
}

std::vector<FilterState> run_lcmve(const LdssModel& model,
                                   const std::vector<Eigen::VectorXd>& ys,
                                   const ConstraintSchedule& schedule,
                                   const FilterState& init) {
  require_static_regime(model);
  if (init.k != 0) {
    throw Error(ErrorCode::kInitialization,
                "continuation state must sit at k = 0");
  }
  InitSpec spec;
  spec.kind = InitKind::kRwlse;
  spec.Sigma = init.P;
  spec.c = init.x_hat;
  return run_lckf(model, ys, schedule, spec, FilterKind::kLcmve);
}

}  // namespace lckf
