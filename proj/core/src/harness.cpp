#include "lckf/harness.hpp"

#include <atomic>
#include <mutex>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "lckf/batch.hpp"
#include "lckf/linalg.hpp"

namespace lckf {

namespace {

constexpr int kChunkTrials = 256;

FilterKind scenario_kind(const Scenario& scenario) {
  if (!scenario.schedule.empty()) return FilterKind::kLckf;
  return scenario.init.kind == InitKind::kFisher ? FilterKind::kLmvdrf
                                                 : FilterKind::kKf;
}

void fill_constraint_dims(const LdssModel& model,
                          const ConstraintSchedule& schedule,
                          FilterReport* info) {
  if (info == nullptr) return;
  const StackedConstraint stacked =
      compile_schedule(schedule, model, model.horizon);
  info->lambda_rows = static_cast<int>(stacked.Lambda.rows());
  info->lambda_cols = static_cast<int>(stacked.Lambda.cols());
}

}  // namespace

FilterPlan make_named_plan(const Scenario& scenario, const std::string& name,
                           FilterReport* info) {
  const LdssModel& model = scenario.model;
  if (info != nullptr) info->name = name;

  if (name == "kf") {
    const ConstraintSchedule schedule = empty_schedule(model.horizon);
    fill_constraint_dims(model, schedule, info);
    if (info != nullptr) {
      info->kind = FilterKind::kKf;
      info->init = InitKind::kPrior;
    }
    return make_plan(model, schedule, InitSpec{}, FilterKind::kKf);
  }
  if (name == "lmvdrf") {
    const ConstraintSchedule schedule = lmvdrf_schedule(model);
    fill_constraint_dims(model, schedule, info);
    InitSpec init;
    init.kind = InitKind::kFisher;
    if (info != nullptr) {
      info->kind = FilterKind::kLmvdrf;
      info->init = InitKind::kFisher;
    }
    return make_plan(model, schedule, init, FilterKind::kLmvdrf);
  }
  if (name == "lckf") {
    fill_constraint_dims(model, scenario.schedule, info);
    if (info != nullptr) {
      info->kind = FilterKind::kLckf;
      info->init = scenario.init.kind;
    }
    return make_plan(model, scenario.schedule, scenario.init,
                     FilterKind::kLckf);
  }
  if (name == "lclmvdrf") {
    const ConstraintSchedule schedule =
        lckf_to_lclmvdrf(scenario.schedule, model);
    fill_constraint_dims(model, schedule, info);
    InitSpec init;
    init.kind = InitKind::kFisher;
    if (info != nullptr) {
      info->kind = FilterKind::kLckf;
      info->init = InitKind::kFisher;
    }
    return make_plan(model, schedule, init, FilterKind::kLckf);
  }
  if (name == "lcmve") {
    require_static_regime(model);
    fill_constraint_dims(model, scenario.schedule, info);
    InitSpec init = scenario.init;
    if (init.kind == InitKind::kPrior) init.kind = InitKind::kFisher;
    if (info != nullptr) {
      info->kind = FilterKind::kLcmve;
      info->init = init.kind;
    }
    return make_plan(model, scenario.schedule, init, FilterKind::kLcmve);
  }
  throw Error(ErrorCode::kParse, "unknown filter name '" + name + "'");
}

int harness_thread_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("LCKF_LAB_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && parsed >= 1) n = std::min<long>(parsed, n);
  }
  return n;
}

namespace {

// Per-chunk partial sums, reduced in chunk order afterwards so the report is
// identical for any thread count.
struct ChunkSums {
  // [filter][step]
  std::vector<std::vector<Eigen::VectorXd>> sum_e;
  std::vector<std::vector<Eigen::MatrixXd>> sum_ee;
  // [step](i, j) cross sums of squared error norms
  std::vector<Eigen::MatrixXd> sq_cross;
};

RunReport run_on_plans(const Scenario& scenario,
                       std::vector<FilterReport> infos,
                       const std::vector<FilterPlan>& plans) {
  const auto t_start = std::chrono::steady_clock::now();
  const LdssModel& model = scenario.model;
  const int K = model.horizon;
  const int nf = static_cast<int>(plans.size());
  if (scenario.trials < 1) {
    throw Error(ErrorCode::kModel, "trials must be >= 1");
  }

  const TrajectorySimulator simulator(model);
  const int n_chunks = (scenario.trials + kChunkTrials - 1) / kChunkTrials;
  std::vector<ChunkSums> chunks(static_cast<size_t>(n_chunks));

  auto run_chunk = [&](int chunk) {
    ChunkSums sums;
    sums.sum_e.assign(static_cast<size_t>(nf), {});
    sums.sum_ee.assign(static_cast<size_t>(nf), {});
    for (int f = 0; f < nf; ++f) {
      for (int k = 1; k <= K; ++k) {
        const int p = model.state_dim(k);
        sums.sum_e[static_cast<size_t>(f)].push_back(
            Eigen::VectorXd::Zero(p));
        sums.sum_ee[static_cast<size_t>(f)].push_back(
            Eigen::MatrixXd::Zero(p, p));
      }
    }
    sums.sq_cross.assign(static_cast<size_t>(K),
                         Eigen::MatrixXd::Zero(nf, nf));

    const int t_begin = chunk * kChunkTrials;
    const int t_end = std::min(t_begin + kChunkTrials, scenario.trials);
    Eigen::VectorXd sq(nf);
    std::vector<std::vector<Eigen::VectorXd>> estimates(
        static_cast<size_t>(nf));
    for (int t = t_begin; t < t_end; ++t) {
      const std::uint64_t seed = scenario.seed + static_cast<std::uint64_t>(t);
      Trajectory traj;
      try {
        traj = scenario.x1_override
                   ? simulator.simulate(*scenario.x1_override, seed)
                   : simulator.simulate_from_prior(seed);
      } catch (const Error& e) {
        throw Error(e.code(), "trial " + std::to_string(t) + ": " + e.what());
      }
      for (int f = 0; f < nf; ++f) {
        estimates[static_cast<size_t>(f)] = apply_plan(
            plans[static_cast<size_t>(f)], model, traj.measurements);
      }
      for (int k = 0; k < K; ++k) {
        for (int f = 0; f < nf; ++f) {
          const Eigen::VectorXd e =
              estimates[static_cast<size_t>(f)][static_cast<size_t>(k)] -
              traj.states[static_cast<size_t>(k)];
          sums.sum_e[static_cast<size_t>(f)][static_cast<size_t>(k)] += e;
          sums.sum_ee[static_cast<size_t>(f)][static_cast<size_t>(k)] +=
              e * e.transpose();
          sq[f] = e.squaredNorm();
        }
        sums.sq_cross[static_cast<size_t>(k)] += sq * sq.transpose();
      }
    }
    chunks[static_cast<size_t>(chunk)] = std::move(sums);
  };

  const int threads = std::min(harness_thread_count(), n_chunks);
  if (threads <= 1) {
    for (int c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int i = 0; i < threads; ++i) {
      pool.emplace_back([&] {
        for (;;) {
          const int c = next.fetch_add(1);
          if (c >= n_chunks) return;
          try {
            run_chunk(c);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  // Reduce in chunk order.
  RunReport report;
  report.seed = scenario.seed;
  report.trials = scenario.trials;
  report.horizon = K;
  report.filters = std::move(infos);
  report.sq_err_cross.assign(static_cast<size_t>(K),
                             Eigen::MatrixXd::Zero(nf, nf));

  const double inv_n = 1.0 / static_cast<double>(scenario.trials);
  for (int f = 0; f < nf; ++f) {
    FilterReport& fr = report.filters[static_cast<size_t>(f)];
    fr.steps.assign(static_cast<size_t>(K), StepStats{});
    for (int k = 0; k < K; ++k) {
      const int p = model.state_dim(k + 1);
      Eigen::VectorXd sum_e = Eigen::VectorXd::Zero(p);
      Eigen::MatrixXd sum_ee = Eigen::MatrixXd::Zero(p, p);
      for (const ChunkSums& c : chunks) {
        sum_e += c.sum_e[static_cast<size_t>(f)][static_cast<size_t>(k)];
        sum_ee += c.sum_ee[static_cast<size_t>(f)][static_cast<size_t>(k)];
      }
      StepStats& step = fr.steps[static_cast<size_t>(k)];
      step.theoretical_P = plans[static_cast<size_t>(f)].P[static_cast<size_t>(k)];
      step.empirical_mse = sum_ee * inv_n;
      step.bias = sum_e * inv_n;
      step.constraint_residual =
          plans[static_cast<size_t>(f)].constraint_residual[static_cast<size_t>(k)];
      step.theo_trace = step.theoretical_P.trace();
      step.emp_trace = step.empirical_mse.trace();
      step.bias_norm = step.bias.norm();
    }
  }
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(nf, nf);
    for (const ChunkSums& c : chunks) {
      cross += c.sq_cross[static_cast<size_t>(k)];
    }
    report.sq_err_cross[static_cast<size_t>(k)] = cross * inv_n;
  }

  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

}  // namespace

RunReport run_trials(const Scenario& scenario) {
  // Always executes the scenario's own schedule and init; the display name
  // reflects what they amount to.
  FilterReport info;
  std::vector<FilterPlan> plans;
  plans.push_back(make_named_plan(scenario, "lckf", &info));
  info.name = to_string(scenario_kind(scenario));
  info.kind = scenario_kind(scenario);
  std::vector<FilterReport> infos;
  infos.push_back(std::move(info));
  return run_on_plans(scenario, std::move(infos), plans);
}

RunReport compare_filters(const Scenario& scenario,
                          const std::vector<std::string>& filter_names) {
  if (filter_names.empty()) {
    throw Error(ErrorCode::kParse, "filter list is empty");
  }
  std::vector<FilterPlan> plans;
  std::vector<FilterReport> infos;
  plans.reserve(filter_names.size());
  infos.reserve(filter_names.size());
  for (const std::string& name : filter_names) {
    FilterReport info;
    plans.push_back(make_named_plan(scenario, name, &info));
    infos.push_back(std::move(info));
  }
  return run_on_plans(scenario, std::move(infos), plans);
}

DistortionlessReport distortionless_check(const Scenario& scenario,
                                          const Eigen::VectorXd& x1_a,
                                          const Eigen::VectorXd& x1_b) {
  const LdssModel& model = scenario.model;
  const FilterPlan plan = make_named_plan(scenario, "lckf", nullptr);
  const TrajectorySimulator simulator(model);

  DistortionlessReport report;
  for (int t = 0; t < scenario.trials; ++t) {
    const std::uint64_t seed = scenario.seed + static_cast<std::uint64_t>(t);
    const Trajectory traj_a = simulator.simulate(x1_a, seed);
    const Trajectory traj_b = simulator.simulate(x1_b, seed);
    const std::vector<Eigen::VectorXd> est_a =
        apply_plan(plan, model, traj_a.measurements);
    const std::vector<Eigen::VectorXd> est_b =
        apply_plan(plan, model, traj_b.measurements);
    for (int k = 0; k < model.horizon; ++k) {
      const Eigen::VectorXd diff =
          (est_a[static_cast<size_t>(k)] - traj_a.states[static_cast<size_t>(k)]) -
          (est_b[static_cast<size_t>(k)] - traj_b.states[static_cast<size_t>(k)]);
      report.max_error_difference = std::max(
          report.max_error_difference, diff.cwiseAbs().maxCoeff());
    }
  }
  report.passed = report.max_error_difference <= report.tolerance;
  return report;
}

Scenario make_reference_scenario(int horizon, int trials,
                                 std::uint64_t seed) {
  const double angle = 0.35;
  const double rho = 0.95;
  Eigen::MatrixXd F(2, 2);
  F << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  F *= rho;
  Eigen::MatrixXd H(3, 2);
  H << 1.0, 0.0, 0.0, 1.0, 0.7, -0.4;
  const Eigen::MatrixXd Cw = 0.09 * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd Cv = 0.25 * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::VectorXd x0_mean = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd Cx0 = Eigen::MatrixXd::Identity(2, 2);

  Scenario scenario;
  scenario.model =
      make_time_invariant_model(horizon, F, H, Cw, Cv, x0_mean, Cx0);
  scenario.schedule = empty_schedule(horizon);
  scenario.trials = trials;
  scenario.seed = seed;
  return scenario;
}

}  // namespace lckf
