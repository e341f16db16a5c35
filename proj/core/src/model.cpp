#include "lckf/model.hpp"

#include <random>
#include <sstream>

#include "lckf/linalg.hpp"

namespace lckf {

namespace {

void check_step(int k, int lo, int hi, const char* what) {
  if (k < lo || k > hi) {
    std::ostringstream msg;
    msg << what << " index " << k << " outside [" << lo << ", " << hi << "]";
    throw Error(ErrorCode::kModel, msg.str());
  }
}

std::string shape(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

int LdssModel::state_dim(int k) const {
  check_step(k, 1, horizon, "state");
  if (k == 1) {
    if (!H.empty()) return static_cast<int>(H[0].cols());
    return static_cast<int>(x0_mean.size());
  }
  return static_cast<int>(F[static_cast<size_t>(k) - 2].rows());
}

int LdssModel::meas_dim(int k) const {
  check_step(k, 1, horizon, "measurement");
  return static_cast<int>(H[static_cast<size_t>(k) - 1].rows());
}

const Eigen::MatrixXd& LdssModel::transition(int k) const {
  check_step(k, 1, horizon - 1, "transition");
  return F[static_cast<size_t>(k) - 1];
}

const Eigen::MatrixXd& LdssModel::measurement(int k) const {
  check_step(k, 1, horizon, "measurement");
  return H[static_cast<size_t>(k) - 1];
}

const Eigen::MatrixXd& LdssModel::state_noise_cov(int k) const {
  check_step(k, 1, horizon - 1, "state noise");
  return Cw[static_cast<size_t>(k) - 1];
}

const Eigen::MatrixXd& LdssModel::meas_noise_cov(int k) const {
  check_step(k, 1, horizon, "measurement noise");
  return Cv[static_cast<size_t>(k) - 1];
}

bool LdssModel::has_state_noise_cross(int k) const {
  return !Cwx.empty() && k >= 1 && k <= horizon - 1 &&
         Cwx[static_cast<size_t>(k) - 1].size() > 0 &&
         !Cwx[static_cast<size_t>(k) - 1].isZero(0.0);
}

bool LdssModel::has_meas_noise_cross(int k) const {
  return !Cvx.empty() && k >= 1 && k <= horizon &&
         Cvx[static_cast<size_t>(k) - 1].size() > 0 &&
         !Cvx[static_cast<size_t>(k) - 1].isZero(0.0);
}

Eigen::MatrixXd LdssModel::state_noise_state_cross(int k) const {
  check_step(k, 1, horizon - 1, "state noise cross");
  if (!Cwx.empty() && Cwx[static_cast<size_t>(k) - 1].size() > 0) {
    return Cwx[static_cast<size_t>(k) - 1];
  }
  return Eigen::MatrixXd::Zero(state_dim(k + 1), state_dim(k));
}

Eigen::MatrixXd LdssModel::meas_noise_state_cross(int k) const {
  check_step(k, 1, horizon, "measurement noise cross");
  if (!Cvx.empty() && Cvx[static_cast<size_t>(k) - 1].size() > 0) {
    return Cvx[static_cast<size_t>(k) - 1];
  }
  return Eigen::MatrixXd::Zero(meas_dim(k), state_dim(k));
}

LdssModel make_time_invariant_model(int horizon, const Eigen::MatrixXd& F,
                                    const Eigen::MatrixXd& H,
                                    const Eigen::MatrixXd& Cw,
                                    const Eigen::MatrixXd& Cv,
                                    const Eigen::VectorXd& x0_mean,
                                    const Eigen::MatrixXd& Cx0) {
  LdssModel model;
  model.horizon = horizon;
  model.F.assign(static_cast<size_t>(std::max(horizon - 1, 0)), F);
  model.H.assign(static_cast<size_t>(horizon), H);
  model.Cw.assign(static_cast<size_t>(std::max(horizon - 1, 0)), Cw);
  model.Cv.assign(static_cast<size_t>(horizon), Cv);
  model.x0_mean = x0_mean;
  model.Cx0 = Cx0;
  return model;
}

bool ValidationReport::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS" : "FAIL") << "  " << c.name;
    if (!c.detail.empty()) out << "  (" << c.detail << ")";
    out << '\n';
  }
  return out.str();
}

namespace {

void check_psd(ValidationReport& report, const std::string& name,
               const Eigen::MatrixXd& m) {
  ValidationCheck check{name, false, ""};
  if (m.rows() != m.cols()) {
    check.detail = "not square: " + shape(m);
  } else if (!m.allFinite()) {
    check.detail = "non-finite entries";
  } else if ((m - m.transpose()).norm() > 1e-10 * (1.0 + m.norm())) {
    check.detail = "not symmetric";
  } else {
    const double min_ev = linalg::min_eigenvalue(m);
    check.passed = min_ev >= -linalg::psd_tolerance(m);
    if (!check.passed) {
      check.detail = "min eigenvalue " + std::to_string(min_ev);
    }
  }
  report.checks.push_back(std::move(check));
}

}  // namespace

ValidationReport validate_model(const LdssModel& model) {
  ValidationReport report;

  const int K = model.horizon;
  {
    ValidationCheck c{"horizon", K >= 1, ""};
    if (!c.passed) c.detail = "horizon must be >= 1";
    report.checks.push_back(c);
    if (!c.passed) return report;
  }

  // Sequence lengths.
  {
    ValidationCheck c{"sequence lengths", true, ""};
    const size_t k1 = static_cast<size_t>(K - 1);
    const size_t k = static_cast<size_t>(K);
    if (model.F.size() != k1 || model.Cw.size() != k1 ||
        model.H.size() != k || model.Cv.size() != k ||
        (!model.Cwx.empty() && model.Cwx.size() != k1) ||
        (!model.Cvx.empty() && model.Cvx.size() != k)) {
      c.passed = false;
      c.detail = "expected |F|=|Cw|=K-1, |H|=|Cv|=K";
    }
    report.checks.push_back(c);
    if (!c.passed) return report;
  }

  // Dimension chain: cols(F_k) = P_k, rows(F_k) = P_{k+1}, cols(H_k) = P_k.
  {
    ValidationCheck c{"dimension chain", true, ""};
    int p = static_cast<int>(model.H[0].cols());
    if (model.x0_mean.size() != p || model.Cx0.rows() != p ||
        model.Cx0.cols() != p) {
      c.passed = false;
      c.detail = "prior dimension does not match cols(H_1)";
    }
    for (int k = 1; k <= K && c.passed; ++k) {
      const Eigen::MatrixXd& Hk = model.H[static_cast<size_t>(k) - 1];
      if (Hk.cols() != p) {
        c.passed = false;
        c.detail = "H_" + std::to_string(k) + " is " + shape(Hk) +
                   ", expected cols " + std::to_string(p);
        break;
      }
      const Eigen::MatrixXd& Cvk = model.Cv[static_cast<size_t>(k) - 1];
      if (Cvk.rows() != Hk.rows() || Cvk.cols() != Hk.rows()) {
        c.passed = false;
        c.detail = "Cv_" + std::to_string(k) + " is " + shape(Cvk);
        break;
      }
      if (!model.Cvx.empty() &&
          model.Cvx[static_cast<size_t>(k) - 1].size() > 0) {
        const Eigen::MatrixXd& cross = model.Cvx[static_cast<size_t>(k) - 1];
        if (cross.rows() != Hk.rows() || cross.cols() != p) {
          c.passed = false;
          c.detail = "Cvx_" + std::to_string(k) + " is " + shape(cross);
          break;
        }
      }
      if (k == K) break;
      const Eigen::MatrixXd& Fk = model.F[static_cast<size_t>(k) - 1];
      if (Fk.cols() != p) {
        c.passed = false;
        c.detail = "F_" + std::to_string(k) + " is " + shape(Fk) +
                   ", expected cols " + std::to_string(p);
        break;
      }
      const int p_next = static_cast<int>(Fk.rows());
      const Eigen::MatrixXd& Cwk = model.Cw[static_cast<size_t>(k) - 1];
      if (Cwk.rows() != p_next || Cwk.cols() != p_next) {
        c.passed = false;
        c.detail = "Cw_" + std::to_string(k) + " is " + shape(Cwk);
        break;
      }
      if (!model.Cwx.empty() &&
          model.Cwx[static_cast<size_t>(k) - 1].size() > 0) {
        const Eigen::MatrixXd& cross = model.Cwx[static_cast<size_t>(k) - 1];
        if (cross.rows() != p_next || cross.cols() != p) {
          c.passed = false;
          c.detail = "Cwx_" + std::to_string(k) + " is " + shape(cross);
          break;
        }
      }
      p = p_next;
    }
    report.checks.push_back(c);
    if (!c.passed) return report;
  }

  // Finiteness of every system matrix.
  {
    ValidationCheck c{"finiteness", true, ""};
    auto all_finite = [&](const std::vector<Eigen::MatrixXd>& seq) {
      for (const auto& m : seq) {
        if (!m.allFinite()) return false;
      }
      return true;
    };
    if (!all_finite(model.F) || !all_finite(model.H) ||
        !all_finite(model.Cw) || !all_finite(model.Cv) ||
        !all_finite(model.Cwx) || !all_finite(model.Cvx) ||
        !model.x0_mean.allFinite() || !model.Cx0.allFinite()) {
      c.passed = false;
      c.detail = "non-finite entries";
    }
    report.checks.push_back(c);
  }

  check_psd(report, "Cx0 PSD", model.Cx0);
  for (int k = 1; k <= K - 1; ++k) {
    check_psd(report, "Cw_" + std::to_string(k) + " PSD",
              model.Cw[static_cast<size_t>(k) - 1]);
  }
  for (int k = 1; k <= K; ++k) {
    check_psd(report, "Cv_" + std::to_string(k) + " PSD",
              model.Cv[static_cast<size_t>(k) - 1]);
  }

  // With cross terms present the per-block checks are not sufficient; the
  // joint elementary covariance must be PSD as well.
  if (!model.Cwx.empty() || !model.Cvx.empty()) {
    ValidationCheck c{"joint elementary covariance PSD", false, ""};
    try {
      const JointSecondOrder joint = joint_second_order(model, K);
      const double min_ev = linalg::min_eigenvalue(joint.cov);
      c.passed = min_ev >= -linalg::psd_tolerance(joint.cov);
      if (!c.passed) c.detail = "min eigenvalue " + std::to_string(min_ev);
    } catch (const Error& e) {
      c.detail = e.what();
    }
    report.checks.push_back(c);
  }

  return report;
}

void require_valid(const LdssModel& model) {
  const ValidationReport report = validate_model(model);
  if (!report.all_passed()) {
    throw Error(ErrorCode::kModel,
                "model validation failed:\n" + report.summary());
  }
}

Eigen::MatrixXd transition_product(const LdssModel& model, int k, int l) {
  check_step(k, 1, model.horizon, "transition product");
  check_step(l, 1, model.horizon, "transition product");
  if (k < l) {
    return Eigen::MatrixXd::Zero(model.state_dim(k), model.state_dim(l));
  }
  Eigen::MatrixXd product =
      Eigen::MatrixXd::Identity(model.state_dim(l), model.state_dim(l));
  for (int m = l; m < k; ++m) {
    const Eigen::MatrixXd& Fm = model.transition(m);
    if (Fm.cols() != product.rows()) {
      throw Error(ErrorCode::kModel,
                  "transition product dimension mismatch at step " +
                      std::to_string(m));
    }
    product = Fm * product;
  }
  return product;
}

JointSecondOrder joint_second_order(const LdssModel& model, int horizon) {
  check_step(horizon, 1, model.horizon, "joint second order");
  JointSecondOrder joint;
  joint.x1_offset = 0;
  joint.x1_dim = model.state_dim(1);
  int offset = joint.x1_dim;
  for (int k = 1; k <= horizon - 1; ++k) {
    joint.w_offset.push_back(offset);
    joint.w_dim.push_back(static_cast<int>(model.state_noise_cov(k).rows()));
    offset += joint.w_dim.back();
  }
  for (int k = 1; k <= horizon; ++k) {
    joint.v_offset.push_back(offset);
    joint.v_dim.push_back(model.meas_dim(k));
    offset += joint.v_dim.back();
  }
  joint.total_dim = offset;

  Eigen::MatrixXd& c = joint.cov;
  c = Eigen::MatrixXd::Zero(offset, offset);
  c.topLeftCorner(joint.x1_dim, joint.x1_dim) = model.Cx0;
  auto set_sym = [&](int r, int cpos, const Eigen::MatrixXd& block) {
    c.block(r, cpos, block.rows(), block.cols()) = block;
    c.block(cpos, r, block.cols(), block.rows()) = block.transpose();
  };
  for (int k = 1; k <= horizon - 1; ++k) {
    const size_t i = static_cast<size_t>(k) - 1;
    c.block(joint.w_offset[i], joint.w_offset[i], joint.w_dim[i],
            joint.w_dim[i]) = model.state_noise_cov(k);
    if (model.has_state_noise_cross(k)) {
      // C(w_k, x_k): direct (w_1, x_1) cross at k = 1, one-lag colour
      // C(w_k, w_{k-1}) otherwise.
      const Eigen::MatrixXd cross = model.state_noise_state_cross(k);
      if (k == 1) {
        set_sym(joint.w_offset[i], joint.x1_offset, cross);
      } else {
        set_sym(joint.w_offset[i], joint.w_offset[i - 1], cross);
      }
    }
  }
  for (int k = 1; k <= horizon; ++k) {
    const size_t i = static_cast<size_t>(k) - 1;
    c.block(joint.v_offset[i], joint.v_offset[i], joint.v_dim[i],
            joint.v_dim[i]) = model.meas_noise_cov(k);
    if (model.has_meas_noise_cross(k)) {
      // C(v_k, x_k): direct (v_1, x_1) cross at k = 1, one-lag w/v cross
      // C(w_{k-1}, v_k) = Cvx_k^T otherwise.
      const Eigen::MatrixXd cross = model.meas_noise_state_cross(k);
      if (k == 1) {
        set_sym(joint.v_offset[i], joint.x1_offset, cross);
      } else {
        set_sym(joint.w_offset[i - 1], joint.v_offset[i], cross.transpose());
      }
    }
  }
  return joint;
}

TrajectorySimulator::TrajectorySimulator(const LdssModel& model)
    : model_(&model), joint_(joint_second_order(model, model.horizon)) {
  has_x1_cross_ = model.has_meas_noise_cross(1) ||
                  (model.horizon > 1 && model.has_state_noise_cross(1));
  const int noise_dim = joint_.total_dim - joint_.x1_dim;
  noise_factor_ = linalg::psd_sqrt(
      joint_.cov.bottomRightCorner(noise_dim, noise_dim));
  joint_factor_ = linalg::psd_sqrt(joint_.cov);
}

namespace {

Eigen::VectorXd standard_normal(int n, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = normal(engine);
  return u;
}

}  // namespace

Trajectory TrajectorySimulator::propagate(const Eigen::VectorXd& x1,
                                          const Eigen::VectorXd& eta,
                                          std::uint64_t seed) const {
  const LdssModel& model = *model_;
  const int K = model.horizon;
  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(static_cast<size_t>(K));
  traj.measurements.reserve(static_cast<size_t>(K));

  const int x1_dim = joint_.x1_dim;
  Eigen::VectorXd x = x1;
  for (int k = 1; k <= K; ++k) {
    const size_t i = static_cast<size_t>(k) - 1;
    const Eigen::VectorXd v =
        eta.segment(joint_.v_offset[i] - x1_dim, joint_.v_dim[i]);
    traj.states.push_back(x);
    traj.measurements.push_back(model.measurement(k) * x + v);
    if (k < K) {
      const Eigen::VectorXd w =
          eta.segment(joint_.w_offset[i] - x1_dim, joint_.w_dim[i]);
      x = model.transition(k) * x + w;
    }
  }
  return traj;
}

Trajectory TrajectorySimulator::simulate(const Eigen::VectorXd& x1,
                                         std::uint64_t seed) const {
  if (x1.size() != joint_.x1_dim) {
    throw Error(ErrorCode::kModel, "x1 has dimension " +
                                       std::to_string(x1.size()) +
                                       ", expected " +
                                       std::to_string(joint_.x1_dim));
  }
  if (has_x1_cross_) {
    throw Error(ErrorCode::kStatistics,
                "model correlates noise with x_1; a fixed x1 cannot "
                "reproduce that structure (draw from the prior instead)");
  }
  const int noise_dim = joint_.total_dim - joint_.x1_dim;
  const Eigen::VectorXd eta =
      noise_factor_ * standard_normal(noise_dim, seed);
  return propagate(x1, eta, seed);
}

Trajectory TrajectorySimulator::simulate_from_prior(std::uint64_t seed) const {
  const Eigen::VectorXd zeta =
      joint_factor_ * standard_normal(joint_.total_dim, seed);
  const Eigen::VectorXd x1 =
      model_->x0_mean + zeta.head(joint_.x1_dim);
  return propagate(x1, zeta.tail(joint_.total_dim - joint_.x1_dim), seed);
}

Trajectory simulate_trajectory(const LdssModel& model,
                               const Eigen::VectorXd& x1,
                               std::uint64_t seed) {
  return TrajectorySimulator(model).simulate(x1, seed);
}

}  // namespace lckf
