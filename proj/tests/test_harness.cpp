#include <doctest.h>

#include <cstdlib>

#include "lckf/harness.hpp"
#include "lckf/linalg.hpp"
#include "test_utils.hpp"

using namespace lckf;

TEST_CASE("a noiseless trial started at the truth has zero error") {
  Scenario scenario;
  scenario.model = make_time_invariant_model(
      4, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2),
      Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2),
      Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Zero(2, 2));
  scenario.schedule = empty_schedule(4);
  scenario.trials = 1;
  scenario.x1_override = Eigen::VectorXd::Zero(2);
  // Degenerate-noise model: skip the S conditioning guard by observing with
  // a tiny but nonzero covariance instead.
  scenario.model.Cv.assign(4, 1e-12 * Eigen::MatrixXd::Identity(2, 2));
  const RunReport report = run_trials(scenario);
  for (const StepStats& s : report.filters[0].steps) {
    CHECK(s.emp_trace < 1e-12);
    CHECK(s.bias_norm < 1e-9);
  }
}

TEST_CASE("reports are deterministic and thread-count independent") {
  Scenario scenario = make_reference_scenario(6, 2000, 77);
  const RunReport a = run_trials(scenario);
  const RunReport b = run_trials(scenario);
  for (int k = 0; k < 6; ++k) {
    CHECK(a.filters[0].steps[k].empirical_mse ==
          b.filters[0].steps[k].empirical_mse);
    CHECK(a.filters[0].steps[k].bias == b.filters[0].steps[k].bias);
  }

#ifndef _WIN32
  setenv("LCKF_LAB_THREADS", "1", 1);
  const RunReport serial = run_trials(scenario);
  setenv("LCKF_LAB_THREADS", "4", 1);
  const RunReport parallel = run_trials(scenario);
  unsetenv("LCKF_LAB_THREADS");
  for (int k = 0; k < 6; ++k) {
    CHECK(serial.filters[0].steps[k].empirical_mse ==
          parallel.filters[0].steps[k].empirical_mse);
    CHECK(serial.filters[0].steps[k].bias == parallel.filters[0].steps[k].bias);
  }
#endif
}

TEST_CASE("empirical covariance tracks the theoretical posterior") {
  Scenario scenario = make_reference_scenario(6, 100000, 4242);
  const RunReport report = run_trials(scenario);
  for (const StepStats& s : report.filters[0].steps) {
    for (int i = 0; i < 2; ++i) {
      const double theo = s.theoretical_P(i, i);
      const double emp = s.empirical_mse(i, i);
      CHECK(std::abs(emp - theo) / theo < 0.05);
    }
    // Unbiased start propagates: 4-sigma componentwise bound.
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(s.bias(i)) <=
            4.0 * std::sqrt(s.theoretical_P(i, i) / report.trials));
    }
  }
}

TEST_CASE("compare_filters") {
  Scenario scenario = make_reference_scenario(6, 4000, 99);

  SUBCASE("a filter against itself is identical") {
    const RunReport report = compare_filters(scenario, {"kf", "kf"});
    for (int k = 0; k < 6; ++k) {
      CHECK(report.filters[0].steps[k].emp_trace ==
            report.filters[1].steps[k].emp_trace);
    }
  }

  SUBCASE("an unconstrained schedule is the plain recursion") {
    const RunReport report = compare_filters(scenario, {"kf", "lckf"});
    for (int k = 0; k < 6; ++k) {
      CHECK(std::abs(report.filters[0].steps[k].emp_trace -
                     report.filters[1].steps[k].emp_trace) < 1e-12);
    }
  }

  SUBCASE("matched prior: the free optimum never loses") {
    const RunReport report = compare_filters(scenario, {"kf", "lmvdrf"});
    for (int k = 0; k < 6; ++k) {
      CHECK(report.filters[0].steps[k].theo_trace <=
            report.filters[1].steps[k].theo_trace + 1e-12);
    }
  }

  SUBCASE("misspecified prior: the distortionless filter wins early") {
    scenario.x1_override = 10.0 * Eigen::VectorXd::Ones(2);
    const RunReport report = compare_filters(scenario, {"kf", "lmvdrf"});
    CHECK(report.filters[1].steps[0].emp_trace <
          report.filters[0].steps[0].emp_trace);
    CHECK(report.filters[1].steps[1].emp_trace <
          report.filters[0].steps[1].emp_trace);
  }

  SUBCASE("report content is independent of the filter order") {
    const RunReport ab = compare_filters(scenario, {"kf", "lmvdrf"});
    const RunReport ba = compare_filters(scenario, {"lmvdrf", "kf"});
    for (int k = 0; k < 6; ++k) {
      CHECK(ab.filters[0].steps[k].empirical_mse ==
            ba.filters[1].steps[k].empirical_mse);
      CHECK(ab.filters[1].steps[k].empirical_mse ==
            ba.filters[0].steps[k].empirical_mse);
      CHECK(ab.sq_err_cross[k](0, 1) == ba.sq_err_cross[k](1, 0));
    }
  }

  SUBCASE("unknown filter names are rejected") {
    CHECK_THROWS_AS(compare_filters(scenario, {"kf", "ukf"}), Error);
    CHECK_THROWS_AS(compare_filters(scenario, {}), Error);
  }
}

TEST_CASE("per-step constraint residuals stay at the gain tolerance") {
  std::mt19937_64 rng(71);
  Scenario scenario;
  scenario.model = test::random_model(rng, 2, 3, 6);
  scenario.schedule = test::random_schedule(rng, scenario.model);
  scenario.trials = 64;
  scenario.seed = 5;
  const RunReport report = run_trials(scenario);
  for (const StepStats& s : report.filters[0].steps) {
    CHECK(s.constraint_residual <= 1e-10 * 2.0);
  }
}

TEST_CASE("distortionless_check separates filter families") {
  Scenario scenario = make_reference_scenario(6, 16, 123);
  const Eigen::VectorXd a = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd b = 10.0 * Eigen::VectorXd::Ones(2);

  SUBCASE("distortionless run passes") {
    Scenario s = scenario;
    s.schedule = lmvdrf_schedule(s.model);
    s.init.kind = InitKind::kFisher;
    const DistortionlessReport report = distortionless_check(s, a, b);
    CHECK(report.passed);
  }

  SUBCASE("prior-matched run fails") {
    const DistortionlessReport report = distortionless_check(scenario, a, b);
    CHECK_FALSE(report.passed);
    CHECK(report.max_error_difference > 1e-3);
  }

  SUBCASE("widened constrained schedule passes") {
    Scenario s = scenario;
    ConstraintSchedule schedule = empty_schedule(6);
    Eigen::MatrixXd Delta = Eigen::MatrixXd::Zero(3, 1);
    Delta(2, 0) = 1.0;
    schedule.steps[0] = new_constraint(ConstraintFamily::kC2, Delta,
                                       Eigen::MatrixXd::Zero(2, 1));
    for (int k = 2; k <= 6; ++k) {
      schedule.steps[static_cast<size_t>(k) - 1].family =
          ConstraintFamily::kC3;
    }
    s.schedule = lckf_to_lclmvdrf(schedule, s.model);
    s.init.kind = InitKind::kFisher;
    const DistortionlessReport report = distortionless_check(s, a, b);
    CHECK(report.passed);
  }
}
