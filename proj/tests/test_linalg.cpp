#include <doctest.h>

#include "lckf/linalg.hpp"
#include "test_utils.hpp"

using namespace lckf;

TEST_CASE("psd_sqrt reproduces the matrix and clamps tiny negatives") {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd a = test::random_spd(rng, 4);
  const Eigen::MatrixXd root = linalg::psd_sqrt(a);
  CHECK(test::rel_err(Eigen::MatrixXd(root * root.transpose()), a) < 1e-12);

  // Rank-deficient input is fine.
  Eigen::MatrixXd low = Eigen::MatrixXd::Zero(3, 3);
  low(0, 0) = 2.0;
  const Eigen::MatrixXd low_root = linalg::psd_sqrt(low);
  CHECK((low_root * low_root.transpose() - low).norm() < 1e-12);

  // Indefinite input is rejected.
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(linalg::psd_sqrt(bad), Error);
}

TEST_CASE("SpdSolver solves and guards conditioning") {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd a = test::random_spd(rng, 5);
  const Eigen::MatrixXd b = test::random_matrix(rng, 5, 3);
  const linalg::SpdSolver solver(a);
  CHECK((a * solver.solve(b) - b).norm() < 1e-10);

  Eigen::MatrixXd ill = Eigen::MatrixXd::Identity(3, 3);
  ill(2, 2) = 1e-12;
  CHECK_THROWS_AS(linalg::SpdSolver(ill, 1e8), Error);
  CHECK_NOTHROW(linalg::SpdSolver(ill, 1e14));

  CHECK_THROWS_AS(linalg::SpdSolver(Eigen::MatrixXd::Zero(2, 2)), Error);
}

TEST_CASE("rank uses the relative singular-value cutoff") {
  Eigen::MatrixXd m(3, 2);
  m << 1, 2, 2, 4, 3, 6;  // second column is twice the first
  CHECK(linalg::rank(m) == 1);
  CHECK_FALSE(linalg::has_full_column_rank(m));
  m(2, 1) = 0.0;
  CHECK(linalg::has_full_column_rank(m));
  CHECK(linalg::has_full_column_rank(Eigen::MatrixXd(3, 0)));
}
