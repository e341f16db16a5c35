#ifndef LCKF_TEST_UTILS_HPP
#define LCKF_TEST_UTILS_HPP

#include <random>

#include "lckf/batch.hpp"
#include "lckf/constraints.hpp"
#include "lckf/filter.hpp"
#include "lckf/model.hpp"

namespace lckf::test {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows,
                                     int cols, double scale = 1.0) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = unif(rng);
  }
  return m;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n,
                                     double scale = 1.0) {
  return Eigen::VectorXd(random_matrix(rng, n, 1, scale));
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n,
                                  double scale = 1.0, double ridge = 0.2) {
  const Eigen::MatrixXd a = random_matrix(rng, n, n, scale);
  return a * a.transpose() + ridge * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd contraction(std::mt19937_64& rng, int n,
                                   double radius = 0.9) {
  Eigen::MatrixXd f = random_matrix(rng, n, n);
  const double top = f.cwiseAbs().maxCoeff() * n;
  return f * (radius / std::max(top, 1e-3));
}

/// Time-varying standard model with fixed dims; optionally adds the one-lag
/// measurement-noise cross term C(v_k, x_k) (still inside the family whose
/// best linear filter is the recursion).
inline LdssModel random_model(std::mt19937_64& rng, int P, int N, int K,
                              bool with_cvx = false,
                              bool zero_mean_prior = true) {
  LdssModel model;
  model.horizon = K;
  for (int k = 1; k <= K - 1; ++k) {
    model.F.push_back(contraction(rng, P));
    model.Cw.push_back(random_spd(rng, P, 0.5, 0.1));
  }
  for (int k = 1; k <= K; ++k) {
    model.H.push_back(random_matrix(rng, N, P));
    model.Cv.push_back(random_spd(rng, N, 0.5, 0.2));
  }
  model.x0_mean = zero_mean_prior ? Eigen::VectorXd::Zero(P)
                                  : random_vector(rng, P);
  model.Cx0 = random_spd(rng, P, 0.7, 0.3);
  if (with_cvx && K >= 2) {
    model.Cvx.assign(static_cast<size_t>(K), Eigen::MatrixXd());
    for (int k = 2; k <= K; ++k) {
      // Small enough that the joint covariance stays PSD.
      model.Cvx[static_cast<size_t>(k) - 1] =
          0.05 * random_matrix(rng, N, P);
    }
  }
  require_valid(model);
  return model;
}

/// Random mixed-family schedule: either a step-1 constraint propagated with
/// C3/C1, or a C2 entering mid-run followed by C3/C1 steps. One constraint
/// column per block keeps every model with N >= 2 admissible.
inline ConstraintSchedule random_schedule(std::mt19937_64& rng,
                                          const LdssModel& model) {
  const int K = model.horizon;
  ConstraintSchedule schedule = empty_schedule(K);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> start_dist(2, std::max(2, K));

  bool active = false;
  if (coin(rng) == 1) {
    schedule.steps[0] = new_constraint(
        ConstraintFamily::kC2, random_matrix(rng, model.meas_dim(1), 1),
        random_matrix(rng, model.state_dim(1), 1, 0.5));
    active = true;
  }
  int start = active ? 2 : start_dist(rng);
  for (int k = 2; k <= K; ++k) {
    if (!active) {
      if (k == start) {
        schedule.steps[static_cast<size_t>(k) - 1] = new_constraint(
            ConstraintFamily::kC2, random_matrix(rng, model.meas_dim(k), 1),
            random_matrix(rng, model.state_dim(k), 1, 0.5));
        active = true;
      }
      continue;
    }
    if (coin(rng) == 1) {
      schedule.steps[static_cast<size_t>(k) - 1] = new_constraint(
          ConstraintFamily::kC1, random_matrix(rng, model.meas_dim(k), 1),
          random_matrix(rng, model.state_dim(k), 1, 0.5));
    } else {
      schedule.steps[static_cast<size_t>(k) - 1].family =
          ConstraintFamily::kC3;
    }
  }
  return schedule;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / (1.0 + b.norm());
}

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / (1.0 + b.norm());
}

inline Eigen::MatrixXd scalar(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return m;
}

inline Eigen::VectorXd scalar_vec(double v) {
  Eigen::VectorXd x(1);
  x[0] = v;
  return x;
}

}  // namespace lckf::test

#endif  // LCKF_TEST_UTILS_HPP
