#include "lckf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lckf::linalg {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(a),
                                                     Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double psd_tolerance(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) return 0.0;
  const double scale = a.trace() / static_cast<double>(a.rows());
  return 1e-10 * std::max(scale, 1e-300) + 1e-300;
}

bool is_psd(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return false;
  return min_eigenvalue(a) >= -psd_tolerance(a);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(a));
  Eigen::VectorXd evals = eig.eigenvalues();
  const double tol = psd_tolerance(a);
  if (evals.minCoeff() < -tol) {
    std::ostringstream msg;
    msg << "matrix is not positive semidefinite (min eigenvalue "
        << evals.minCoeff() << ", tolerance " << -tol << ")";
    throw Error(ErrorCode::kStatistics, msg.str());
  }
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    evals[i] = std::sqrt(std::max(evals[i], 0.0));
  }
  return eig.eigenvectors() * evals.asDiagonal() *
         eig.eigenvectors().transpose();
}

int rank(const Eigen::MatrixXd& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = kRankTolerance * sv[0];
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff) ++r;
  }
  return r;
}

bool has_full_column_rank(const Eigen::MatrixXd& a) {
  if (a.cols() == 0) return true;
  if (a.rows() < a.cols()) return false;
  return rank(a) == a.cols();
}

SpdSolver::SpdSolver(const Eigen::MatrixXd& a, double condition_limit)
    : eig_(symmetrize(a)) {
  const Eigen::VectorXd& evals = eig_.eigenvalues();
  const double max_ev = evals.size() ? evals.maxCoeff() : 0.0;
  const double min_ev = evals.size() ? evals.minCoeff() : 0.0;
  if (min_ev <= 0.0) {
    std::ostringstream msg;
    msg << "matrix is singular or indefinite (min eigenvalue " << min_ev
        << ")";
    throw Error(ErrorCode::kConditioning, msg.str());
  }
  condition_ = max_ev / min_ev;
  if (condition_ > condition_limit) {
    std::ostringstream msg;
    msg << "condition estimate " << condition_ << " exceeds limit "
        << condition_limit;
    throw Error(ErrorCode::kConditioning, msg.str());
  }
}

Eigen::MatrixXd SpdSolver::solve(const Eigen::MatrixXd& rhs) const {
  const Eigen::MatrixXd& v = eig_.eigenvectors();
  return v * eig_.eigenvalues().cwiseInverse().asDiagonal() *
         (v.transpose() * rhs);
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& rhs) const {
  const Eigen::MatrixXd& v = eig_.eigenvectors();
  return v * eig_.eigenvalues().cwiseInverse().asDiagonal() *
         (v.transpose() * rhs);
}

Eigen::MatrixXd SpdSolver::inverse() const {
  const Eigen::Index n = eig_.eigenvectors().rows();
  return solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n)));
}

}  // namespace lckf::linalg
