#pragma once

// Arrow–Debreu exchange markets through the budget fixed point
//
//   w = E p(w),
//
// where p(w) is the Fisher equilibrium price vector for utilities U and
// budgets w. Budgets live on the simplex sum(w) = 1; each application of the
// map solves one Fisher market with PDHCG.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "market_eq/instance.hpp"
#include "market_eq/log.hpp"
#include "market_eq/pdhcg.hpp"
#include "market_eq/report.hpp"
#include "market_eq/sparse.hpp"

namespace market_eq {

struct ExchangeConfig {
  double outer_tol = 1e-6;  // on ||w_next - w||_2
  int max_outer = 100;
  double inner_tol_start = 1e-5;
  int divergence_window = 5;  // consecutive gap increases that count as diverging
  SolverConfig inner;         // tolerance is overridden by the schedule
};

struct FixedPointTrace {
  Status status = Status::max_iters;
  int outer_iterations = 0;
  std::vector<std::vector<double>> budgets_history;  // w^0, w^1, ...
  std::vector<double> budget_gaps;                   // ||w^{k+1} - w^k||_2
  std::vector<double> min_budget_times_n;            // n * min_i w_i^k, a diagnostic only
  std::vector<SolveReport> inner_reports;
  std::vector<double> final_prices;
  std::vector<double> final_budgets;
  double wall_time_seconds = 0.0;
};

struct TStep {
  std::vector<double> w_next;
  std::vector<double> prices;  // p(w), summing to sum(w)
  SolveReport report;
};

namespace detail {

// The Fisher solve runs with budgets scaled to mean one, which keeps prices
// O(1); equilibrium prices are homogeneous of degree one in w, so they are
// scaled back afterwards.
inline double inner_budget_scale(const ExchangeInstance& inst) { return static_cast<double>(inst.agents()); }

}  // namespace detail

// warm_start, when given, is the previous inner solution in scaled units.
inline TStep apply_T(const ExchangeInstance& inst, std::span<const double> w, const SolverConfig& inner,
                     const Solution* warm_start = nullptr) {
  const auto n = static_cast<std::size_t>(inst.agents());
  if (w.size() != n) throw StructuralError("budget vector length must equal the number of agents");
  double total = 0.0;
  for (double v : w) {
    if (!(v > 0.0)) throw ValidationError("apply_T needs strictly positive budgets");
    total += v;
  }
  const double scale = detail::inner_budget_scale(inst);
  FisherInstance fisher{inst.utilities, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) fisher.budgets[i] = scale * w[i] / total;

  TStep out;
  out.report = solve_fisher_pdhcg(fisher, inner, warm_start);
  out.prices = out.report.solution.p;
  for (double& p : out.prices) p *= total / scale;

  out.w_next.assign(n, 0.0);
  multiply(inst.endowments, out.prices, out.w_next);
  double s = 0.0;
  for (double v : out.w_next) s += v;
  for (double& v : out.w_next) v /= s;
  return out;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline FixedPointTrace solve_exchange(const ExchangeInstance& inst, const ExchangeConfig& cfg = {}) {
  require_valid(inst);
  if (!(cfg.outer_tol > 0.0) || cfg.max_outer < 1 || cfg.divergence_window < 1) {
    throw std::invalid_argument("exchange configuration out of range");
  }
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<std::size_t>(inst.agents());
  FixedPointTrace trace;
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  trace.budgets_history.push_back(w);
  trace.min_budget_times_n.push_back(static_cast<double>(n) * *std::min_element(w.begin(), w.end()));

  SolverConfig inner = cfg.inner;
  inner.tolerance = cfg.inner_tol_start;
  const double tight_tol = std::min(cfg.inner_tol_start, cfg.outer_tol / 10.0);
  Solution warm;
  bool have_warm = false;
  int increases = 0;

  for (int k = 0; k < cfg.max_outer; ++k) {
    TStep step = apply_T(inst, w, inner, have_warm ? &warm : nullptr);
    const Status inner_status = step.report.status;
    warm = step.report.solution;
    have_warm = true;
    const double gap = euclidean_distance(step.w_next, w);
    trace.budget_gaps.push_back(gap);
    trace.final_prices = step.prices;
    trace.inner_reports.push_back(std::move(step.report));
    trace.outer_iterations = k + 1;
    if (inner_status != Status::optimal) {
      trace.status = inner_status;
      break;
    }
    w = std::move(step.w_next);
    trace.budgets_history.push_back(w);
    trace.min_budget_times_n.push_back(static_cast<double>(n) * *std::min_element(w.begin(), w.end()));
    log::info("outer ", k + 1, " gap ", gap, " inner iters ", trace.inner_reports.back().inner_iterations);

    if (gap <= cfg.outer_tol) {
      trace.status = Status::optimal;
      break;
    }
    if (gap < 10.0 * cfg.outer_tol) inner.tolerance = tight_tol;
    const std::size_t g = trace.budget_gaps.size();
    increases = (g >= 2 && trace.budget_gaps[g - 1] > trace.budget_gaps[g - 2]) ? increases + 1 : 0;
    if (increases >= cfg.divergence_window) {
      trace.status = Status::diverging;
      break;
    }
  }
  trace.final_budgets = w;
  trace.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

inline Json to_json(const FixedPointTrace& t, bool include_inner_solutions = false) {
  Json j;
  j["status"] = to_string(t.status);
  j["outer_iterations"] = t.outer_iterations;
  j["wall_time_seconds"] = t.wall_time_seconds;
  j["budget_gaps"] = t.budget_gaps;
  j["min_budget_times_n"] = t.min_budget_times_n;
  j["budgets_history"] = t.budgets_history;
  j["final_budgets"] = t.final_budgets;
  j["final_prices"] = t.final_prices;
  Json inner = Json::array();
  for (const auto& r : t.inner_reports) {
    Json e = to_json(r);
    if (!include_inner_solutions) {
      e.erase("solution");
      e.erase("prices");
    }
    inner.push_back(std::move(e));
  }
  j["inner_reports"] = std::move(inner);
  return j;
}

}  // namespace market_eq
