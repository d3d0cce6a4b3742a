#pragma once

// Outer loop shared by PDHG and PDHCG: step-size setup, periodic residual
// checks, restart decisions and report assembly. The method policy owns the
// iterates; the driver only sees residuals and restart movements.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "market_eq/adaptive.hpp"
#include "market_eq/errors.hpp"
#include "market_eq/kkt.hpp"
#include "market_eq/log.hpp"
#include "market_eq/parallel.hpp"
#include "market_eq/report.hpp"

namespace market_eq {

struct StepSizes {
  double tau;    // primal
  double sigma;  // dual
};

// Distances between consecutive restart points.
struct RestartMove {
  double primal = 0.0;
  double dual = 0.0;
};

namespace detail {

inline void fold_average(std::vector<double>& avg, const std::vector<double>& now, std::int64_t k) {
  const double a = static_cast<double>(k) / static_cast<double>(k + 1);
  const double b = 1.0 / static_cast<double>(k + 1);
  parallel::for_each(static_cast<std::int64_t>(avg.size()), [&](std::int64_t i) {
    const auto ii = static_cast<std::size_t>(i);
    avg[ii] = a * avg[ii] + b * now[ii];
  });
}

}  // namespace detail

inline void check_config(const SolverConfig& cfg) {
  if (!(cfg.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (cfg.max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
  if (cfg.restart == RestartMode::fixed && cfg.restart_length < 1) {
    throw std::invalid_argument("fixed restart length must be at least 1");
  }
  if (cfg.check_every < 1) throw std::invalid_argument("check_every must be at least 1");
  if (!(cfg.initial_omega > 0.0)) throw std::invalid_argument("initial_omega must be positive");
  if (!(cfg.theta > 0.0 && cfg.theta <= 1.0)) throw std::invalid_argument("theta must lie in (0, 1]");
  if (!(cfg.omega_bound_factor >= 1.0)) throw std::invalid_argument("omega_bound_factor must be >= 1");
  if (cfg.omega_check_period < 1) throw std::invalid_argument("omega_check_period must be >= 1");
  cfg.restart_params.check();
}

template <class Method>
SolveReport run_restarted(Method& method, const SolverConfig& cfg) {
  check_config(cfg);
  parallel::ThreadScope threads(cfg.threads);
  const auto clock_start = std::chrono::steady_clock::now();

  double L = method.op_norm(cfg.power_iterations);
  if (!(L > 0.0)) L = 1.0;
  StepController ctrl;
  StepSizes steps{};
  if (cfg.step == StepMode::theory) {
    steps = {0.5 / L, 0.5 / L};
    ctrl = StepController::start(0.5 / L, 1.0, cfg.theta);
  } else {
    ctrl = StepController::start(0.9 / L, cfg.initial_omega, cfg.theta);
    ctrl.omega_bound_factor = cfg.omega_bound_factor;
    ctrl.check_period = cfg.omega_check_period;
    steps = {ctrl.tau(), ctrl.sigma()};
  }

  SolveReport report;
  report.config = cfg;

  auto checked = [](const Residuals& r) {
    if (!std::isfinite(r.rel_kkt)) throw NumericalFault("residuals became non-finite");
    return r;
  };

  Residuals start = checked(method.residuals(false));
  report.residual_history.push_back({0, start.rel_kkt});
  double metric_last_restart = start.rel_kkt;
  double metric_previous = std::numeric_limits<double>::infinity();
  bool done = start.rel_kkt < cfg.tolerance;
  bool final_average = false;
  Residuals final_res = start;

  // Every attempted step counts as an iteration, rejected ones included.
  std::int64_t total = 0;
  std::int64_t since_check = 0;
  while (!done && total < cfg.max_iterations) {
    const double bound = method.attempt(steps);
    ++total;
    if constexpr (Method::kTracksPasses) report.subproblem_passes.push_back(method.last_passes());
    if (cfg.step == StepMode::adaptive) {
      const bool acceptable = ctrl.eta <= bound || ctrl.eta <= clamp_eta(ctrl, 0.0);
      ctrl.eta = clamp_eta(ctrl, propose_eta(ctrl.eta, bound, total - 1));
      steps = {ctrl.tau(), ctrl.sigma()};
      if (!acceptable) {
        method.reject();
        ++report.rejected_steps;
        continue;
      }
    }
    method.accept();
    ++since_check;

    const bool fixed_restart_due =
        cfg.restart == RestartMode::fixed && method.inner_count() >= cfg.restart_length;
    const bool check_due = since_check >= cfg.check_every || total == cfg.max_iterations;
    if (!check_due && !fixed_restart_due) continue;
    since_check = 0;

    const Residuals r_avg = checked(method.residuals(true));
    const Residuals r_cur = checked(method.residuals(false));
    const bool avg_better = r_avg.rel_kkt <= r_cur.rel_kkt;
    const Residuals& best = avg_better ? r_avg : r_cur;
    report.residual_history.push_back({total, best.rel_kkt});
    log::debug("iter ", total, " avg ", r_avg.rel_kkt, " cur ", r_cur.rel_kkt, " eta ", ctrl.eta, " omega ",
               ctrl.omega);

    if (best.rel_kkt < cfg.tolerance) {
      done = true;
      final_average = avg_better;
      final_res = best;
      break;
    }
    final_average = avg_better;
    final_res = best;

    bool restart = false;
    if (cfg.restart == RestartMode::fixed) {
      restart = fixed_restart_due;
    } else {
      restart = should_restart(best.rel_kkt, metric_last_restart, metric_previous, method.inner_count(), total,
                               cfg.restart_params);
    }
    if (!restart) {
      metric_previous = best.rel_kkt;
      continue;
    }

    // Fixed-length restarts follow the plain scheme and always restart to
    // the average; adaptive restarts take whichever candidate is better.
    const bool to_average = cfg.restart == RestartMode::fixed || avg_better;
    const RestartMove mv = method.restart(to_average);
    ++report.restarts;
    metric_last_restart = to_average ? r_avg.rel_kkt : r_cur.rel_kkt;
    metric_previous = std::numeric_limits<double>::infinity();
    // After the restart the current iterate is the restart point.
    final_average = false;
    final_res = to_average ? r_avg : r_cur;

    if (cfg.step != StepMode::theory) {
      update_weights(ctrl, mv.primal, mv.dual);
      if (ctrl.eta < StepController::kEtaLowerFactor * ctrl.eta_initial ||
          ctrl.eta > StepController::kEtaUpperFactor * ctrl.eta_initial) {
        throw NumericalFault("step size left its clamp range");
      }
      steps = {ctrl.tau(), ctrl.sigma()};
    }
  }

  report.inner_iterations = total;
  report.status = done ? Status::optimal : Status::max_iters;
  report.solution = method.solution(final_average);
  report.final_residuals = final_res;
  report.final_eta = ctrl.eta;
  report.final_omega = ctrl.omega;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return report;
}

}  // namespace market_eq
