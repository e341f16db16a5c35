#ifndef LCKF_LINALG_HPP
#define LCKF_LINALG_HPP

#include <Eigen/Dense>

#include "lckf/errors.hpp"

namespace lckf::linalg {

/// Relative rank tolerance: a singular value counts only if it exceeds
/// kRankTolerance times the largest one.
inline constexpr double kRankTolerance = 1e-10;

/// Default condition-number guard for symmetric solves; scenarios may
/// override it through LdssModel::condition_limit.
inline constexpr double kDefaultConditionLimit = 1e8;

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a);

/// Smallest eigenvalue of the symmetric part of `a`.
double min_eigenvalue(const Eigen::MatrixXd& a);

/// Scale-aware PSD floor: 1e-10 * trace(a)/n, with an absolute floor so the
/// zero matrix passes.
double psd_tolerance(const Eigen::MatrixXd& a);

bool is_psd(const Eigen::MatrixXd& a);

/// Symmetric PSD square root with eigenvalue clamping at psd_tolerance().
/// Throws ErrorCode::kStatistics if the matrix is indefinite beyond the
/// tolerance.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a);

int rank(const Eigen::MatrixXd& a);
bool has_full_column_rank(const Eigen::MatrixXd& a);

/// Symmetric positive-definite solver backed by an eigendecomposition, so a
/// condition estimate comes for free and every "inverse" in the formulas is a
/// solve against the factorization. Throws ErrorCode::kConditioning when the
/// estimate exceeds the limit (or the matrix is not positive definite).
class SpdSolver {
 public:
  explicit SpdSolver(const Eigen::MatrixXd& a,
                     double condition_limit = kDefaultConditionLimit);

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd inverse() const;  // solve against identity
  double condition() const { return condition_; }

 private:
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_;
  double condition_ = 0.0;
};

}  // namespace lckf::linalg

#endif  // LCKF_LINALG_HPP
