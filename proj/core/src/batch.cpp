#include "lckf/batch.hpp"

#include <algorithm>
#include <string>

#include "lckf/linalg.hpp"

namespace lckf {

namespace {

// Linear maps from the elementary vector zeta = (x_1, w_1.., v_1..) to the
// states and measurements. Built progressively so the matrix products match
// transition_product() operation for operation.
struct ElementaryMaps {
  JointSecondOrder joint;
  std::vector<Eigen::MatrixXd> state;  // x_l = state[l-1] * zeta (centered)
  std::vector<Eigen::MatrixXd> meas;   // y_l = meas[l-1] * zeta (centered)
  Eigen::MatrixXd ybar;                // stacked measurement map
};

ElementaryMaps elementary_maps(const LdssModel& model, int k) {
  ElementaryMaps maps;
  maps.joint = joint_second_order(model, k);
  const JointSecondOrder& joint = maps.joint;
  const int d = joint.total_dim;

  Eigen::MatrixXd x_map = Eigen::MatrixXd::Zero(joint.x1_dim, d);
  x_map.leftCols(joint.x1_dim).setIdentity();
  int meas_rows = 0;
  for (int l = 1; l <= k; ++l) {
    const size_t i = static_cast<size_t>(l) - 1;
    maps.state.push_back(x_map);
    Eigen::MatrixXd y_map = model.measurement(l) * x_map;
    y_map.middleCols(joint.v_offset[i], joint.v_dim[i]) +=
        Eigen::MatrixXd::Identity(joint.v_dim[i], joint.v_dim[i]);
    meas_rows += joint.v_dim[i];
    maps.meas.push_back(std::move(y_map));
    if (l < k) {
      Eigen::MatrixXd next = model.transition(l) * x_map;
      next.middleCols(joint.w_offset[i], joint.w_dim[i]) +=
          Eigen::MatrixXd::Identity(joint.w_dim[i], joint.w_dim[i]);
      x_map = std::move(next);
    }
  }

  maps.ybar.resize(meas_rows, d);
  int row = 0;
  for (const auto& y_map : maps.meas) {
    maps.ybar.middleRows(row, y_map.rows()) = y_map;
    row += static_cast<int>(y_map.rows());
  }
  return maps;
}

}  // namespace

StackedModel build_stacked(const LdssModel& model, int k) {
  if (k < 1 || k > model.horizon) {
    throw Error(ErrorCode::kModel,
                "stack horizon " + std::to_string(k) + " outside [1, " +
                    std::to_string(model.horizon) + "]");
  }
  const ElementaryMaps maps = elementary_maps(model, k);
  const JointSecondOrder& joint = maps.joint;

  StackedModel stacked;
  stacked.k = k;

  int meas_rows = static_cast<int>(maps.ybar.rows());
  stacked.A_bar.resize(meas_rows, joint.x1_dim);
  int row = 0;
  for (int l = 1; l <= k; ++l) {
    const Eigen::MatrixXd A_l =
        model.measurement(l) * transition_product(model, l, 1);
    stacked.A_bar.middleRows(row, A_l.rows()) = A_l;
    row += static_cast<int>(A_l.rows());
  }

  const Eigen::MatrixXd& x_map = maps.state.back();
  const Eigen::MatrixXd cov_ybar_t = joint.cov * maps.ybar.transpose();
  stacked.Cy = linalg::symmetrize(maps.ybar * cov_ybar_t);
  stacked.Cxy = x_map * cov_ybar_t;
  stacked.Cx = linalg::symmetrize(x_map * joint.cov * x_map.transpose());

  // nbar = ybar - A_bar x_1: zero the x_1 block of the measurement map.
  Eigen::MatrixXd n_map = maps.ybar;
  n_map.leftCols(joint.x1_dim).setZero();
  stacked.Cn = linalg::symmetrize(n_map * joint.cov * n_map.transpose());

  // G maps the stacked state noise into x_k.
  int w_total = 0;
  for (int dim : joint.w_dim) w_total += dim;
  stacked.G = x_map.middleCols(joint.x1_dim, w_total);

  stacked.y_mean = stacked.A_bar * model.x0_mean;
  stacked.x_mean = transition_product(model, k, 1) * model.x0_mean;
  return stacked;
}

UncorrelationReport uncorrelation_condition_residuals(const LdssModel& model,
                                                      int k) {
  const ElementaryMaps maps = elementary_maps(model, k);
  const JointSecondOrder& joint = maps.joint;

  UncorrelationReport report;
  double scale = 0.0;
  int rows_prefix = 0;
  for (int j = 1; j <= k; ++j) {
    const size_t i = static_cast<size_t>(j) - 1;
    if (j >= 2) {
      const Eigen::MatrixXd ybar_prefix = maps.ybar.topRows(rows_prefix);
      // C(w_{j-1}, ybar_{j-1}) and C(v_j, ybar_{j-1}) as selector rows of
      // the elementary covariance pushed through the measurement map.
      const Eigen::MatrixXd cw =
          joint.cov.middleRows(joint.w_offset[i - 1], joint.w_dim[i - 1]) *
          ybar_prefix.transpose();
      const Eigen::MatrixXd cv =
          joint.cov.middleRows(joint.v_offset[i], joint.v_dim[i]) *
          ybar_prefix.transpose();
      report.w_residual.push_back(cw.cwiseAbs().maxCoeff());
      report.v_residual.push_back(cv.cwiseAbs().maxCoeff());
    }
    scale = std::max(scale,
                     model.meas_noise_cov(j).cwiseAbs().maxCoeff());
    if (j < k) {
      scale = std::max(scale,
                       model.state_noise_cov(j).cwiseAbs().maxCoeff());
    }
    rows_prefix += joint.v_dim[i];
  }
  for (double r : report.w_residual) {
    report.max_residual = std::max(report.max_residual, r);
  }
  for (double r : report.v_residual) {
    report.max_residual = std::max(report.max_residual, r);
  }
  report.satisfied = report.max_residual <= 1e-10 * (1.0 + scale);
  return report;
}

BatchSolution batch_llmse(const Eigen::MatrixXd& Cx,
                          const Eigen::MatrixXd& Cxy,
                          const Eigen::MatrixXd& Cy,
                          double condition_limit) {
  const linalg::SpdSolver cy(Cy, condition_limit);
  BatchSolution solution;
  solution.W = cy.solve(Eigen::MatrixXd(Cxy.transpose()));
  solution.P = linalg::symmetrize(Cx - Cxy * solution.W);
  solution.constraint_residual = 0.0;
  return solution;
}

BatchSolution batch_lcllmse(const Eigen::MatrixXd& Cx,
                            const Eigen::MatrixXd& Cxy,
                            const Eigen::MatrixXd& Cy,
                            const Eigen::MatrixXd& Lambda,
                            const Eigen::MatrixXd& T,
                            double condition_limit) {
  if (Lambda.cols() == 0) return batch_llmse(Cx, Cxy, Cy, condition_limit);
  if (Lambda.rows() != Cy.rows()) {
    throw Error(ErrorCode::kConstraint,
                "Lambda has " + std::to_string(Lambda.rows()) +
                    " rows, expected " + std::to_string(Cy.rows()));
  }
  if (T.rows() != Cx.rows() || T.cols() != Lambda.cols()) {
    throw Error(ErrorCode::kConstraint, "target T has wrong shape");
  }
  if (!linalg::has_full_column_rank(Lambda)) {
    throw Error(ErrorCode::kConstraint, "Lambda is column-rank deficient");
  }

  const linalg::SpdSolver cy(Cy, condition_limit);
  const Eigen::MatrixXd W_free = cy.solve(Eigen::MatrixXd(Cxy.transpose()));
  const Eigen::MatrixXd cy_inv_lambda = cy.solve(Lambda);
  const linalg::SpdSolver gram(Lambda.transpose() * cy_inv_lambda,
                               condition_limit);

  // Residual target after the unconstrained part: T^T - Lambda^T W_free.
  const Eigen::MatrixXd deficit =
      T.transpose() - Lambda.transpose() * W_free;

  BatchSolution solution;
  solution.W = W_free + cy_inv_lambda * gram.solve(deficit);
  solution.P = linalg::symmetrize(Cx - Cxy * W_free +
                                  deficit.transpose() * gram.solve(deficit));
  solution.constraint_residual =
      (solution.W.transpose() * Lambda - T).norm();
  return solution;
}

BatchSolution batch_lmvdr(const LdssModel& model, int k) {
  if (!linalg::has_full_column_rank(model.measurement(1))) {
    throw Error(ErrorCode::kInitialization, "H_1 is not full column rank");
  }
  const StackedModel stacked = build_stacked(model, k);
  return batch_lcllmse(stacked.Cx, stacked.Cxy, stacked.Cy, stacked.A_bar,
                       transition_product(model, k, 1),
                       model.condition_limit);
}

BatchSolution kkt_reference(const Eigen::MatrixXd& Cx,
                            const Eigen::MatrixXd& Cxy,
                            const Eigen::MatrixXd& Cy,
                            const Eigen::MatrixXd& Lambda,
                            const Eigen::MatrixXd& T) {
  const Eigen::Index n = Cy.rows();
  const Eigen::Index m = Lambda.cols();
  const Eigen::Index p = Cx.rows();

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = 2.0 * Cy;
  kkt.topRightCorner(n, m) = Lambda;
  kkt.bottomLeftCorner(m, n) = Lambda.transpose();

  // One column of W per state component; the trace objective decouples.
  Eigen::MatrixXd rhs(n + m, p);
  rhs.topRows(n) = 2.0 * Cxy.transpose();
  rhs.bottomRows(m) = T.transpose();

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::kConditioning, "KKT system is singular");
  }
  const Eigen::MatrixXd primal_dual = lu.solve(rhs);

  BatchSolution solution;
  solution.W = primal_dual.topRows(n);
  solution.P = linalg::symmetrize(
      Cx - Cxy * solution.W - solution.W.transpose() * Cxy.transpose() +
      solution.W.transpose() * Cy * solution.W);
  solution.constraint_residual =
      m == 0 ? 0.0 : (solution.W.transpose() * Lambda - T).norm();
  return solution;
}

Eigen::VectorXd apply_batch(const StackedModel& stacked,
                            const BatchSolution& solution,
                            const Eigen::VectorXd& ybar) {
  if (ybar.size() != stacked.Cy.rows()) {
    throw Error(ErrorCode::kModel, "stacked measurement has wrong dimension");
  }
  return stacked.x_mean +
         solution.W.transpose() * (ybar - stacked.y_mean);
}

Eigen::VectorXd stack_measurements(const Trajectory& traj, int k) {
  Eigen::Index total = 0;
  for (int l = 0; l < k; ++l) total += traj.measurements[static_cast<size_t>(l)].size();
  Eigen::VectorXd ybar(total);
  Eigen::Index row = 0;
  for (int l = 0; l < k; ++l) {
    const Eigen::VectorXd& y = traj.measurements[static_cast<size_t>(l)];
    ybar.segment(row, y.size()) = y;
    row += y.size();
  }
  return ybar;
}

}  // namespace lckf
