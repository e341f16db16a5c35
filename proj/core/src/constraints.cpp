#include "lckf/constraints.hpp"

#include <string>

#include "lckf/linalg.hpp"

namespace lckf {

const char* to_string(ConstraintFamily family) {
  switch (family) {
    case ConstraintFamily::kNone: return "none";
    case ConstraintFamily::kC1: return "C1";
    case ConstraintFamily::kC2: return "C2";
    case ConstraintFamily::kC3: return "C3";
  }
  return "?";
}

StepConstraint no_constraint() { return StepConstraint{}; }

StepConstraint new_constraint(ConstraintFamily family, Eigen::MatrixXd Delta,
                              Eigen::MatrixXd T) {
  StepConstraint c;
  c.family = family;
  c.Delta = std::move(Delta);
  c.T = std::move(T);
  return c;
}

const StepConstraint& ConstraintSchedule::at(int k) const {
  if (k < 1 || k > horizon()) {
    throw Error(ErrorCode::kSchedule,
                "schedule has no step " + std::to_string(k));
  }
  return steps[static_cast<size_t>(k) - 1];
}

bool ConstraintSchedule::empty() const {
  for (const auto& s : steps) {
    if (s.has_gain_constraint()) return false;
  }
  return true;
}

ConstraintSchedule empty_schedule(int horizon) {
  ConstraintSchedule schedule;
  schedule.steps.assign(static_cast<size_t>(horizon), no_constraint());
  return schedule;
}

ConstraintSchedule lmvdrf_schedule(const LdssModel& model) {
  ConstraintSchedule schedule = empty_schedule(model.horizon);
  const int p1 = model.state_dim(1);
  schedule.steps[0] =
      new_constraint(ConstraintFamily::kC2, model.measurement(1),
                     Eigen::MatrixXd::Identity(p1, p1));
  for (int k = 2; k <= model.horizon; ++k) {
    schedule.steps[static_cast<size_t>(k) - 1].family = ConstraintFamily::kC3;
  }
  return schedule;
}

namespace {

void check_new_block(const StepConstraint& c, const LdssModel& model, int k,
                     bool allow_wide_step1) {
  const int n = model.meas_dim(k);
  const int p = model.state_dim(k);
  const auto m = c.Delta.cols();
  if (c.Delta.rows() != n) {
    throw Error(ErrorCode::kConstraint,
                "Delta_" + std::to_string(k) + " has " +
                    std::to_string(c.Delta.rows()) + " rows, expected " +
                    std::to_string(n));
  }
  if (c.T.rows() != p || c.T.cols() != m) {
    throw Error(ErrorCode::kConstraint,
                "T_" + std::to_string(k) + " has wrong shape");
  }
  const bool too_wide = allow_wide_step1 ? (m > n) : (m >= n);
  if (too_wide) {
    throw Error(ErrorCode::kDegreesOfFreedom,
                "constraint at step " + std::to_string(k) + " has " +
                    std::to_string(m) + " columns for " + std::to_string(n) +
                    " measurements; the gain has no freedom left");
  }
  if (!linalg::has_full_column_rank(c.Delta)) {
    throw Error(ErrorCode::kConstraint,
                "Delta_" + std::to_string(k) + " is column-rank deficient");
  }
}

}  // namespace

void validate_schedule(const ConstraintSchedule& schedule,
                       const LdssModel& model, int through) {
  if (schedule.horizon() != model.horizon) {
    throw Error(ErrorCode::kSchedule,
                "schedule length " + std::to_string(schedule.horizon()) +
                    " does not match horizon " +
                    std::to_string(model.horizon));
  }
  if (through < 0) through = model.horizon;
  const StepConstraint& first = schedule.at(1);
  if (first.family == ConstraintFamily::kC1 ||
      first.family == ConstraintFamily::kC3) {
    throw Error(ErrorCode::kSchedule,
                "step 1 has nothing to propagate; use C2 or none");
  }
  bool active = first.has_gain_constraint();
  if (active) {
    // Step-1 constraints may carry the distortionless (H_1, I) columns, so
    // width up to N_1 is allowed there.
    check_new_block(first, model, 1, /*allow_wide_step1=*/true);
  }
  for (int k = 2; k <= through; ++k) {
    const StepConstraint& c = schedule.at(k);
    switch (c.family) {
      case ConstraintFamily::kNone:
        if (active) {
          throw Error(ErrorCode::kSchedule,
                      "step " + std::to_string(k) +
                          ": an active constraint cannot be dropped; use C3 "
                          "to propagate it");
        }
        break;
      case ConstraintFamily::kC2:
        if (active) {
          throw Error(ErrorCode::kSchedule,
                      "step " + std::to_string(k) +
                          ": C2 requires an unconstrained history; use C1");
        }
        check_new_block(c, model, k, false);
        active = true;
        break;
      case ConstraintFamily::kC3:
        if (!active) {
          throw Error(ErrorCode::kSchedule,
                      "step " + std::to_string(k) +
                          ": C3 has no active constraint to propagate");
        }
        break;
      case ConstraintFamily::kC1:
        if (!active) {
          throw Error(ErrorCode::kSchedule,
                      "step " + std::to_string(k) +
                          ": C1 has no active constraint to propagate; use "
                          "C2 to introduce one");
        }
        check_new_block(c, model, k, false);
        break;
    }
  }
}

StackedConstraint compile_schedule(const ConstraintSchedule& schedule,
                                   const LdssModel& model, int k) {
  if (k < 1 || k > model.horizon) {
    throw Error(ErrorCode::kSchedule,
                "compile horizon " + std::to_string(k) + " out of range");
  }
  validate_schedule(schedule, model, k);

  Eigen::MatrixXd Lambda;
  Eigen::MatrixXd Gamma;
  int meas_rows = 0;

  const StepConstraint& first = schedule.at(1);
  if (first.has_gain_constraint()) {
    Lambda = first.Delta;
    Gamma = first.T;
  } else {
    Lambda.resize(model.meas_dim(1), 0);
    Gamma.resize(model.state_dim(1), 0);
  }
  meas_rows = model.meas_dim(1);

  for (int j = 2; j <= k; ++j) {
    const StepConstraint& c = schedule.at(j);
    const int n_j = model.meas_dim(j);
    const Eigen::MatrixXd& F_prev = model.transition(j - 1);
    const Eigen::MatrixXd& H_j = model.measurement(j);
    switch (c.family) {
      case ConstraintFamily::kNone: {
        Lambda.conservativeResize(meas_rows + n_j, 0);
        Gamma.resize(model.state_dim(j), 0);
        break;
      }
      case ConstraintFamily::kC2: {
        Lambda = Eigen::MatrixXd::Zero(meas_rows + n_j, c.Delta.cols());
        Lambda.bottomRows(n_j) = c.Delta;
        Gamma = c.T;
        break;
      }
      case ConstraintFamily::kC3: {
        const Eigen::MatrixXd propagated = F_prev * Gamma;
        Eigen::MatrixXd next(meas_rows + n_j, Lambda.cols());
        next.topRows(meas_rows) = Lambda;
        next.bottomRows(n_j) = H_j * propagated;
        Lambda = std::move(next);
        Gamma = propagated;
        break;
      }
      case ConstraintFamily::kC1: {
        const Eigen::MatrixXd propagated = F_prev * Gamma;
        const auto m_old = Lambda.cols();
        const auto m_new = c.Delta.cols();
        Eigen::MatrixXd next =
            Eigen::MatrixXd::Zero(meas_rows + n_j, m_old + m_new);
        next.topLeftCorner(meas_rows, m_old) = Lambda;
        next.bottomLeftCorner(n_j, m_old) = H_j * propagated;
        next.bottomRightCorner(n_j, m_new) = c.Delta;
        Lambda = std::move(next);
        Eigen::MatrixXd gamma_next(propagated.rows(), m_old + m_new);
        gamma_next.leftCols(m_old) = propagated;
        gamma_next.rightCols(m_new) = c.T;
        Gamma = std::move(gamma_next);
        break;
      }
    }
    meas_rows += n_j;
    if (Lambda.cols() > 0 && !linalg::has_full_column_rank(Lambda)) {
      throw Error(ErrorCode::kConstraint,
                  "stacked constraint rank collapsed at step " +
                      std::to_string(j));
    }
  }
  return StackedConstraint{std::move(Lambda), std::move(Gamma)};
}

namespace {

Eigen::MatrixXd drop_zero_columns(const Eigen::MatrixXd& m) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (m.col(c).cwiseAbs().maxCoeff() > 0.0) keep.push_back(c);
  }
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t i = 0; i < keep.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(keep[i]);
  return out;
}

StepConstraint nulling_constraint(Eigen::MatrixXd Delta, Eigen::Index p) {
  Delta = drop_zero_columns(Delta);
  if (Delta.cols() == 0) return no_constraint();
  const Eigen::Index n = Delta.rows();
  if (Delta.cols() >= n) {
    throw Error(ErrorCode::kDegreesOfFreedom,
                "nulling constraint needs fewer columns (" +
                    std::to_string(Delta.cols()) + ") than measurements (" +
                    std::to_string(n) + ")");
  }
  if (!linalg::has_full_column_rank(Delta)) {
    throw Error(ErrorCode::kConstraint,
                "nulling constraint matrix is column-rank deficient");
  }
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(p, Delta.cols());
  return new_constraint(ConstraintFamily::kC2, std::move(Delta),
                        std::move(T));
}

}  // namespace

StepConstraint jacobian_constraints(const Eigen::MatrixXd& H_hat,
                                    const std::vector<Eigen::MatrixXd>& dH,
                                    const std::vector<Eigen::MatrixXd>& dF) {
  const Eigen::Index n = H_hat.rows();
  const Eigen::Index p = H_hat.cols();
  Eigen::Index cols = 0;
  for (const auto& j : dH) cols += j.cols();
  for (const auto& j : dF) cols += j.cols();
  Eigen::MatrixXd Delta(n, cols);
  Eigen::Index c = 0;
  for (const auto& j : dH) {
    if (j.rows() != n) {
      throw Error(ErrorCode::kConstraint,
                  "measurement Jacobian block has wrong row count");
    }
    Delta.middleCols(c, j.cols()) = j;
    c += j.cols();
  }
  for (const auto& j : dF) {
    if (j.rows() != p) {
      throw Error(ErrorCode::kConstraint,
                  "transition Jacobian block has wrong row count");
    }
    Delta.middleCols(c, j.cols()) = H_hat * j;
    c += j.cols();
  }
  return nulling_constraint(std::move(Delta), p);
}

StepConstraint structured_uncertainty_constraints(const Eigen::MatrixXd& A1,
                                                  const Eigen::MatrixXd& A2,
                                                  const Eigen::MatrixXd& H) {
  const Eigen::Index n = H.rows();
  if (A2.size() > 0 && A2.rows() != n) {
    throw Error(ErrorCode::kConstraint, "A2 has wrong row count");
  }
  if (A1.size() > 0 && A1.rows() != H.cols()) {
    throw Error(ErrorCode::kConstraint, "A1 has wrong row count");
  }
  Eigen::MatrixXd Delta(n, A2.cols() + A1.cols());
  if (A2.cols() > 0) Delta.leftCols(A2.cols()) = A2;
  if (A1.cols() > 0) Delta.rightCols(A1.cols()) = H * A1;
  return nulling_constraint(std::move(Delta), H.cols());
}

GainConstraintReport verify_gain_constraint(
    const Eigen::MatrixXd& W, const StepConstraint& constraint) {
  GainConstraintReport report;
  if (!constraint.has_gain_constraint()) {
    report.tolerance = 1e-10;
    return report;
  }
  report.residual =
      (W.transpose() * constraint.Delta - constraint.T).norm();
  report.tolerance = 1e-10 * (1.0 + constraint.T.norm());
  report.passed = report.residual <= report.tolerance;
  return report;
}

ConstraintSchedule lckf_to_lclmvdrf(const ConstraintSchedule& schedule,
                                    const LdssModel& model) {
  if (schedule.horizon() != model.horizon) {
    throw Error(ErrorCode::kSchedule,
                "schedule length does not match horizon");
  }
  if (!linalg::has_full_column_rank(model.measurement(1))) {
    throw Error(ErrorCode::kInitialization, "H_1 is not full column rank");
  }

  const StepConstraint& first = schedule.at(1);
  const int n1 = model.meas_dim(1);
  const int p1 = model.state_dim(1);
  const auto m1 = first.has_gain_constraint() ? first.Delta.cols() : 0;

  Eigen::MatrixXd Delta1(n1, m1 + p1);
  Eigen::MatrixXd T1(p1, m1 + p1);
  if (m1 > 0) {
    Delta1.leftCols(m1) = first.Delta;
    T1.leftCols(m1) = first.T;
  }
  Delta1.rightCols(p1) = model.measurement(1);
  T1.rightCols(p1) = Eigen::MatrixXd::Identity(p1, p1);

  if (Delta1.cols() > n1) {
    throw Error(ErrorCode::kDegreesOfFreedom,
                "N_1 = " + std::to_string(n1) +
                    " is too small to widen the step-1 constraint to " +
                    std::to_string(Delta1.cols()) + " columns");
  }
  if (!linalg::has_full_column_rank(Delta1)) {
    throw Error(ErrorCode::kDegreesOfFreedom,
                "[Delta_1, H_1] is column-rank deficient");
  }

  ConstraintSchedule out = schedule;
  out.steps[0] = new_constraint(ConstraintFamily::kC2, std::move(Delta1),
                                std::move(T1));
  for (int k = 2; k <= model.horizon; ++k) {
    StepConstraint& c = out.steps[static_cast<size_t>(k) - 1];
    // A constraint is active from step 1 on, so fresh blocks become C1 and
    // unconstrained steps become propagating C3 steps.
    if (c.has_gain_constraint()) {
      c.family = ConstraintFamily::kC1;
    } else {
      c = no_constraint();
      c.family = ConstraintFamily::kC3;
    }
  }
  validate_schedule(out, model);
  return out;
}

std::vector<Eigen::MatrixXd> column_jacobians(const MatrixFn& fn,
                                              const Eigen::VectorXd& param) {
  const Eigen::MatrixXd base = fn(param);
  const Eigen::Index p_cols = base.cols();
  const Eigen::Index n_param = param.size();
  std::vector<Eigen::MatrixXd> jac(
      static_cast<size_t>(p_cols),
      Eigen::MatrixXd::Zero(base.rows(), n_param));
  for (Eigen::Index i = 0; i < n_param; ++i) {
    const double step = 1e-6 * (1.0 + std::abs(param[i]));
    Eigen::VectorXd hi = param, lo = param;
    hi[i] += step;
    lo[i] -= step;
    const Eigen::MatrixXd diff = (fn(hi) - fn(lo)) / (2.0 * step);
    for (Eigen::Index c = 0; c < p_cols; ++c) {
      jac[static_cast<size_t>(c)].col(i) = diff.col(c);
    }
  }
  return jac;
}

}  // namespace lckf
