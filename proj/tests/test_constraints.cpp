#include <doctest.h>

#include "lckf/batch.hpp"
#include "lckf/constraints.hpp"
#include "lckf/filter.hpp"
#include "test_utils.hpp"

using namespace lckf;

TEST_CASE("compile_schedule reproduces the stacked distortionless pair") {
  std::mt19937_64 rng(61);
  const LdssModel model = test::random_model(rng, 2, 3, 5);
  const StackedConstraint compiled =
      compile_schedule(lmvdrf_schedule(model), model, 5);
  const StackedModel stacked = build_stacked(model, 5);
  const Eigen::MatrixXd B = transition_product(model, 5, 1);
  CHECK((compiled.Lambda - stacked.A_bar).cwiseAbs().maxCoeff() == 0.0);
  CHECK((compiled.Gamma - B).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compile_schedule zero-pads a lone mid-run constraint") {
  std::mt19937_64 rng(62);
  const LdssModel model = test::random_model(rng, 2, 3, 5);
  ConstraintSchedule schedule = empty_schedule(5);
  const Eigen::MatrixXd Delta = test::random_matrix(rng, 3, 1);
  const Eigen::MatrixXd T = test::random_matrix(rng, 2, 1);
  schedule.steps[3] = new_constraint(ConstraintFamily::kC2, Delta, T);
  schedule.steps[4].family = ConstraintFamily::kC3;
  const StackedConstraint compiled = compile_schedule(schedule, model, 4);
  CHECK(compiled.Lambda.rows() == 3 * 4);
  CHECK(compiled.Lambda.cols() == 1);
  CHECK(compiled.Lambda.topRows(9).isZero(0.0));
  CHECK((compiled.Lambda.bottomRows(3) - Delta).norm() == 0.0);
  CHECK((compiled.Gamma - T).norm() == 0.0);
}

TEST_CASE("compile_schedule builds the block-triangular propagated system") {
  // Step-1 constraint plus C1 at every later step: column block l couples
  // into later rows through H_k B(k,l) T_l, and the targets are B(k,l) T_l.
  std::mt19937_64 rng(63);
  const LdssModel model = test::random_model(rng, 2, 3, 4);
  ConstraintSchedule schedule = empty_schedule(4);
  std::vector<Eigen::MatrixXd> deltas, targets;
  for (int k = 1; k <= 4; ++k) {
    deltas.push_back(test::random_matrix(rng, 3, 1));
    targets.push_back(test::random_matrix(rng, 2, 1));
    schedule.steps[static_cast<size_t>(k) - 1] = new_constraint(
        k == 1 ? ConstraintFamily::kC2 : ConstraintFamily::kC1,
        deltas.back(), targets.back());
  }
  const StackedConstraint compiled = compile_schedule(schedule, model, 4);
  REQUIRE(compiled.Lambda.rows() == 12);
  REQUIRE(compiled.Lambda.cols() == 4);

  for (int l = 1; l <= 4; ++l) {
    // Expected Gamma column: B(4, l) T_l.
    const Eigen::MatrixXd expected_gamma =
        transition_product(model, 4, l) * targets[static_cast<size_t>(l) - 1];
    CHECK(test::rel_err(Eigen::MatrixXd(compiled.Gamma.col(l - 1)),
                        expected_gamma) < 1e-13);
    for (int k = 1; k <= 4; ++k) {
      const Eigen::MatrixXd block =
          compiled.Lambda.block(3 * (k - 1), l - 1, 3, 1);
      Eigen::MatrixXd expected;
      if (k < l) {
        expected = Eigen::MatrixXd::Zero(3, 1);
      } else if (k == l) {
        expected = deltas[static_cast<size_t>(l) - 1];
      } else {
        expected = model.measurement(k) * transition_product(model, k, l) *
                   targets[static_cast<size_t>(l) - 1];
      }
      CHECK(test::rel_err(block, expected) < 1e-13);
    }
  }
}

TEST_CASE("schedule sequencing rules") {
  std::mt19937_64 rng(64);
  const LdssModel model = test::random_model(rng, 2, 3, 4);

  SUBCASE("C3 without anything active") {
    ConstraintSchedule s = empty_schedule(4);
    s.steps[1].family = ConstraintFamily::kC3;
    CHECK_THROWS_AS(validate_schedule(s, model), Error);
  }
  SUBCASE("C2 on top of an active constraint") {
    ConstraintSchedule s = empty_schedule(4);
    s.steps[0] = new_constraint(ConstraintFamily::kC2,
                                test::random_matrix(rng, 3, 1),
                                test::random_matrix(rng, 2, 1));
    s.steps[1].family = ConstraintFamily::kC3;
    s.steps[2] = new_constraint(ConstraintFamily::kC2,
                                test::random_matrix(rng, 3, 1),
                                test::random_matrix(rng, 2, 1));
    s.steps[3].family = ConstraintFamily::kC3;
    CHECK_THROWS_AS(validate_schedule(s, model), Error);
  }
  SUBCASE("dropping an active constraint") {
    ConstraintSchedule s = empty_schedule(4);
    s.steps[0] = new_constraint(ConstraintFamily::kC2,
                                test::random_matrix(rng, 3, 1),
                                test::random_matrix(rng, 2, 1));
    CHECK_THROWS_AS(validate_schedule(s, model), Error);  // step 2 is none
  }
  SUBCASE("too many constraint columns") {
    ConstraintSchedule s = empty_schedule(4);
    s.steps[2] = new_constraint(ConstraintFamily::kC2,
                                test::random_matrix(rng, 3, 3),
                                test::random_matrix(rng, 2, 3));
    s.steps[3].family = ConstraintFamily::kC3;
    CHECK_THROWS_AS(validate_schedule(s, model), Error);
  }
}

TEST_CASE("recursive constrained runs equal the compiled batch problem") {
  // The module's central property: for random mixed schedules the
  // step-by-step recursion lands on the stacked solution.
  std::mt19937_64 rng(65);
  for (int trial = 0; trial < 10; ++trial) {
    const int K = 8;
    const LdssModel model = test::random_model(rng, 2, 3, K);
    const ConstraintSchedule schedule = test::random_schedule(rng, model);
    const TrajectorySimulator sim(model);
    const Trajectory traj = sim.simulate_from_prior(900 + trial);
    const std::vector<FilterState> states =
        run_lckf(model, traj.measurements, schedule, InitSpec{});
    for (int k = 1; k <= K; ++k) {
      const StackedModel stacked = build_stacked(model, k);
      const StackedConstraint constraint =
          compile_schedule(schedule, model, k);
      const BatchSolution batch =
          batch_lcllmse(stacked.Cx, stacked.Cxy, stacked.Cy,
                        constraint.Lambda, constraint.Gamma);
      const Eigen::VectorXd x_batch =
          apply_batch(stacked, batch, stack_measurements(traj, k));
      const FilterState& s = states[static_cast<size_t>(k) - 1];
      CHECK(test::rel_err(s.x_hat, x_batch) < 1e-8);
      CHECK(test::rel_err(s.P, batch.P) < 1e-8);
    }
  }
}

TEST_CASE("jacobian_constraints") {
  std::mt19937_64 rng(66);
  const Eigen::MatrixXd H = test::random_matrix(rng, 4, 2);

  SUBCASE("all-zero Jacobians collapse to no constraint") {
    const std::vector<Eigen::MatrixXd> dH(2, Eigen::MatrixXd::Zero(4, 1));
    const std::vector<Eigen::MatrixXd> dF(2, Eigen::MatrixXd::Zero(2, 1));
    const StepConstraint c = jacobian_constraints(H, dH, dF);
    CHECK(c.family == ConstraintFamily::kNone);
    CHECK_FALSE(c.has_gain_constraint());
  }

  SUBCASE("scalar parameters give the [dH, H dF] block") {
    const std::vector<Eigen::MatrixXd> dH = {test::random_matrix(rng, 4, 1)};
    const std::vector<Eigen::MatrixXd> dF = {test::random_matrix(rng, 1, 1)};
    // One state column each: Delta is 4 x 2.
    const Eigen::MatrixXd H1 = test::random_matrix(rng, 4, 1);
    const StepConstraint c = jacobian_constraints(H1, dH, dF);
    REQUIRE(c.Delta.cols() == 2);
    CHECK((c.Delta.col(0) - dH[0]).norm() == 0.0);
    CHECK((c.Delta.col(1) - H1 * dF[0]).norm() == 0.0);
    CHECK(c.T.isZero(0.0));
    CHECK(c.family == ConstraintFamily::kC2);
  }

  SUBCASE("column_jacobians matches an analytic derivative") {
    const auto fn = [](const Eigen::VectorXd& p) {
      Eigen::MatrixXd m(2, 1);
      m << std::sin(p[0]), std::cos(p[0]);
      return m;
    };
    const Eigen::VectorXd at = test::scalar_vec(0.7);
    const std::vector<Eigen::MatrixXd> jac = column_jacobians(fn, at);
    REQUIRE(jac.size() == 1);
    CHECK(jac[0](0, 0) == doctest::Approx(std::cos(0.7)).epsilon(1e-6));
    CHECK(jac[0](1, 0) == doctest::Approx(-std::sin(0.7)).epsilon(1e-6));
  }
}

TEST_CASE("structured_uncertainty_constraints") {
  std::mt19937_64 rng(67);
  const Eigen::MatrixXd H = test::random_matrix(rng, 3, 2);

  SUBCASE("no uncertainty, no constraint") {
    const StepConstraint c = structured_uncertainty_constraints(
        Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(3, 1), H);
    CHECK(c.family == ConstraintFamily::kNone);
  }

  SUBCASE("basis-vector channels are nulled") {
    Eigen::MatrixXd A2 = Eigen::MatrixXd::Zero(3, 1);
    A2(0, 0) = 1.0;
    Eigen::VectorXd e2 = Eigen::VectorXd::Zero(3);
    e2(1) = 1.0;
    // First column of H2 is e_2, so A1 = e_1 maps onto it.
    Eigen::MatrixXd H2 = H;
    H2.col(0) = e2;
    Eigen::MatrixXd A1 = Eigen::MatrixXd::Zero(2, 1);
    A1(0, 0) = 1.0;
    const StepConstraint c = structured_uncertainty_constraints(A1, A2, H2);
    REQUIRE(c.Delta.cols() == 2);
    CHECK((c.Delta.col(0) - A2).norm() == 0.0);
    CHECK((c.Delta.col(1) - e2).norm() == 0.0);
  }

  SUBCASE("no nontrivial solution when the block is too wide") {
    CHECK_THROWS_AS(structured_uncertainty_constraints(
                        test::random_matrix(rng, 2, 2),
                        test::random_matrix(rng, 3, 1), H),
                    Error);
  }
}

TEST_CASE("verify_gain_constraint") {
  std::mt19937_64 rng(68);
  const LdssModel model = test::random_model(rng, 2, 4, 3);
  PredictedState pred{test::random_vector(rng, 2), test::random_spd(rng, 2)};
  const Eigen::VectorXd y = test::random_vector(rng, 4);
  const StepConstraint c = new_constraint(ConstraintFamily::kC2,
                                          test::random_matrix(rng, 4, 1),
                                          test::random_matrix(rng, 2, 1));

  const FilterState constrained = update_lckf(pred, model, 1, y, c.Delta, c.T);
  CHECK(verify_gain_constraint(constrained.W_last, c).passed);

  const FilterState free = update_kf(pred, model, 1, y);
  const GainConstraintReport bad = verify_gain_constraint(free.W_last, c);
  CHECK_FALSE(bad.passed);
  CHECK(bad.residual > 1e-6);

  CHECK(verify_gain_constraint(free.W_last, no_constraint()).passed);
  CHECK(verify_gain_constraint(free.W_last, no_constraint()).residual == 0.0);
}

TEST_CASE("lckf_to_lclmvdrf") {
  std::mt19937_64 rng(69);
  const LdssModel model = test::random_model(rng, 2, 4, 5);

  SUBCASE("empty schedule widens to the plain distortionless preset") {
    const ConstraintSchedule out =
        lckf_to_lclmvdrf(empty_schedule(5), model);
    const ConstraintSchedule expected = lmvdrf_schedule(model);
    CHECK((out.steps[0].Delta - expected.steps[0].Delta).norm() == 0.0);
    CHECK((out.steps[0].T - expected.steps[0].T).norm() == 0.0);
    for (int k = 2; k <= 5; ++k) {
      CHECK(out.steps[static_cast<size_t>(k) - 1].family ==
            ConstraintFamily::kC3);
    }
  }

  SUBCASE("widened filter keeps the original nulling and turns distortionless") {
    ConstraintSchedule schedule = empty_schedule(5);
    Eigen::MatrixXd Delta1 = Eigen::MatrixXd::Zero(4, 1);
    Delta1(2, 0) = 1.0;
    schedule.steps[0] = new_constraint(ConstraintFamily::kC2, Delta1,
                                       Eigen::MatrixXd::Zero(2, 1));
    for (int k = 2; k <= 5; ++k) {
      schedule.steps[static_cast<size_t>(k) - 1].family =
          ConstraintFamily::kC3;
    }
    const ConstraintSchedule widened = lckf_to_lclmvdrf(schedule, model);

    InitSpec fisher;
    fisher.kind = InitKind::kFisher;
    const TrajectorySimulator sim(model);

    // Distortionless: identical errors under different initial states.
    const Trajectory ta = sim.simulate(Eigen::VectorXd::Zero(2), 606);
    const Trajectory tb = sim.simulate(7.0 * Eigen::VectorXd::Ones(2), 606);
    const std::vector<FilterState> sa =
        run_lckf(model, ta.measurements, widened, fisher);
    const std::vector<FilterState> sb =
        run_lckf(model, tb.measurements, widened, fisher);
    for (int k = 0; k < 5; ++k) {
      const Eigen::VectorXd ea = sa[k].x_hat - ta.states[k];
      const Eigen::VectorXd eb = sb[k].x_hat - tb.states[k];
      CHECK((ea - eb).cwiseAbs().maxCoeff() < 1e-9);
      // Original nulling still holds at step 1.
      if (k == 0) {
        CHECK((sa[k].W_last.transpose() * Delta1).norm() < 1e-10);
      }
    }
  }

  SUBCASE("too-wide step-1 constraint is refused") {
    ConstraintSchedule schedule = empty_schedule(5);
    schedule.steps[0] = new_constraint(ConstraintFamily::kC2,
                                       test::random_matrix(rng, 4, 3),
                                       test::random_matrix(rng, 2, 3));
    for (int k = 2; k <= 5; ++k) {
      schedule.steps[static_cast<size_t>(k) - 1].family =
          ConstraintFamily::kC3;
    }
    CHECK_THROWS_AS(lckf_to_lclmvdrf(schedule, model), Error);
  }
}
