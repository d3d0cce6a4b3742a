#pragma once

// Restart decisions and step-size control shared by both saddle-point
// solvers. Steps are parameterized as tau = eta / omega (primal) and
// sigma = eta * omega (dual), so tau * sigma = eta^2 regardless of omega.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace market_eq {

struct RestartParams {
  double beta_sufficient = 0.2;
  double beta_necessary = 0.8;
  double beta_artificial = 0.2;

  void check() const {
    if (!(0.0 < beta_sufficient && beta_sufficient < beta_necessary && beta_necessary < 1.0)) {
      throw std::invalid_argument("restart parameters need 0 < beta_sufficient < beta_necessary < 1");
    }
    if (!(0.0 < beta_artificial && beta_artificial <= 1.0)) {
      throw std::invalid_argument("beta_artificial must lie in (0, 1]");
    }
  }
};

// Metrics are relative KKT errors of the averaged iterate: now, at the last
// restart point, and at the previous check inside this restart cycle (use
// +inf when there is none).
inline bool should_restart(double metric_now, double metric_at_last_restart, double metric_previous,
                           std::int64_t inner_len, std::int64_t total_iters,
                           const RestartParams& params) {
  if (metric_now <= params.beta_sufficient * metric_at_last_restart) return true;
  if (metric_now <= params.beta_necessary * metric_at_last_restart && metric_now > metric_previous) {
    return true;
  }
  return static_cast<double>(inner_len) >= params.beta_artificial * static_cast<double>(total_iters);
}

struct StepController {
  double eta = 1.0;
  double eta_initial = 1.0;
  double omega = 1.0;
  double omega_initial = 1.0;
  double theta = 0.2;
  double omega_bound_factor = 4.0;  // omega kept in [omega0 / f, f * omega0] at checks
  int check_period = 3;             // restarts between omega bound checks
  int restarts_since_check = 0;

  static constexpr double kEtaLowerFactor = 0.01;
  static constexpr double kEtaUpperFactor = 3.0;

  static StepController start(double eta0, double omega0, double theta = 0.2) {
    if (!(eta0 > 0.0) || !(omega0 > 0.0)) throw std::invalid_argument("step controller needs positive eta, omega");
    StepController c;
    c.eta = c.eta_initial = eta0;
    c.omega = c.omega_initial = omega0;
    c.theta = theta;
    return c;
  }

  double tau() const { return eta / omega; }
  double sigma() const { return eta * omega; }
  double omega_lower() const { return omega_initial / omega_bound_factor; }
  double omega_upper() const { return omega_initial * omega_bound_factor; }
};

// Step-size proposal after a step whose largest acceptable step was `bound`
// (iteration k counted from 0): grow by at most (1 + (k+1)^-0.6), stay
// below (1 - (k+1)^-0.3) * bound. The result is clamped by the caller.
inline double propose_eta(double eta, double bound, std::int64_t k) {
  const double kk = static_cast<double>(k + 1);
  const double grown = (1.0 + std::pow(kk, -0.6)) * eta;
  if (!std::isfinite(bound)) return grown;
  return std::min((1.0 - std::pow(kk, -0.3)) * bound, grown);
}

inline double clamp_eta(const StepController& ctrl, double eta) {
  return std::clamp(eta, StepController::kEtaLowerFactor * ctrl.eta_initial,
                    StepController::kEtaUpperFactor * ctrl.eta_initial);
}

// Called once per restart with the Euclidean distances travelled by the
// primal and dual restart points. The primal weight moves toward the
// observed dual/primal ratio in log space with weight theta. Every
// check_period restarts an out-of-range omega is reset to its initial value.
inline void update_weights(StepController& ctrl, double primal_move, double dual_move) {
  if (primal_move > 0.0 && dual_move > 0.0 && std::isfinite(primal_move) && std::isfinite(dual_move)) {
    const double log_omega =
        ctrl.theta * std::log(dual_move / primal_move) + (1.0 - ctrl.theta) * std::log(ctrl.omega);
    ctrl.omega = std::exp(log_omega);
  }
  if (++ctrl.restarts_since_check >= ctrl.check_period) {
    ctrl.restarts_since_check = 0;
    if (ctrl.omega < ctrl.omega_lower() || ctrl.omega > ctrl.omega_upper()) ctrl.omega = ctrl.omega_initial;
  }
}

}  // namespace market_eq
