#pragma once

// Executable consequences of the convergence theory, checked against oracle
// solutions on small random markets:
//
//   boundedness     theory steps keep every inner iterate within the
//                   1 / (1 - sigma tau L^2) weighted-distance bound
//   average_bound   ||z_avg - z*|| <= 2 ||z_start - z*|| for every restart
//   prices          PDHG, PDHCG and the oracle agree on the unique prices
//   exchange_decay  budget gaps of the exchange fixed point shrink
//   gap_nonneg      smoothed gap centred at the saddle point is >= 0
//   gap_grid        smoothed gap agrees with a brute-force grid maximum
//   permutation     relabelling buyers and goods leaves the trajectory alone
//
// Distances are measured against the oracle point, which is itself only
// accurate to about kOracleSlack; bounds are widened by that amount.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "grid_oracle.hpp"
#include "market_eq/market_eq.hpp"
#include "support.hpp"

namespace market_eq::testing {

enum class Outcome { pass, fail, skipped };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::pass: return "pass";
    case Outcome::fail: return "fail";
    case Outcome::skipped: return "skipped";
  }
  return "?";
}

struct PropertyCheck {
  std::string family;
  std::string size;
  Outcome outcome = Outcome::skipped;
  double measured = 0.0;  // compared against limit; pass means measured <= limit
  double limit = 0.0;
  std::string note;
};

struct PropertyReport {
  std::uint64_t seed = 0;
  std::vector<PropertyCheck> checks;

  bool passed() const {
    return std::none_of(checks.begin(), checks.end(), [](const auto& c) { return c.outcome == Outcome::fail; });
  }
  std::vector<const PropertyCheck*> find(const std::string& family) const {
    std::vector<const PropertyCheck*> out;
    for (const auto& c : checks) {
      if (c.family == family) out.push_back(&c);
    }
    return out;
  }
  Json to_json() const {
    Json j;
    j["seed"] = seed;
    j["passed"] = passed();
    Json arr = Json::array();
    for (const auto& c : checks) {
      arr.push_back(Json{{"family", c.family},
                         {"size", c.size},
                         {"outcome", testing::to_string(c.outcome)},
                         {"measured", c.measured},
                         {"limit", c.limit},
                         {"note", c.note}});
    }
    j["checks"] = std::move(arr);
    return j;
  }
};

struct SuiteSize {
  Index n, m;
};

struct SuiteOptions {
  int restarts = 20;
  std::int64_t restart_length = 50;
  double step_scale = 0.5;  // sigma = tau = step_scale / L; 0.5 is the theory choice
  double xi = 1.0;
  int gap_samples = 100;
  bool exchange = true;
};

inline constexpr double kOracleSlack = 1e-7;

namespace detail {

inline std::string size_label(const SuiteSize& s) { return std::to_string(s.n) + "x" + std::to_string(s.m); }

inline PropertyCheck judge(std::string family, std::string size, double measured, double limit, std::string note = {}) {
  return {std::move(family), std::move(size), measured <= limit ? Outcome::pass : Outcome::fail, measured, limit,
          std::move(note)};
}

inline PropertyCheck skipped(std::string family, std::string size, std::string why) {
  return {std::move(family), std::move(size), Outcome::skipped, 0.0, 0.0, std::move(why)};
}

// Largest singular value of a linear operator from its dense matrix.
template <class Op>
double exact_norm(const Op& op) {
  const auto n_in = static_cast<std::size_t>(op.input_dim());
  const auto n_out = static_cast<std::size_t>(op.output_dim());
  Eigen::MatrixXd A(static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(n_in));
  std::vector<double> e(n_in, 0.0), col(n_out);
  for (std::size_t c = 0; c < n_in; ++c) {
    e[c] = 1.0;
    op.apply(e, col);
    e[c] = 0.0;
    for (std::size_t r = 0; r < n_out; ++r) A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[r];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()(0);
}

inline double weighted_dist(std::span<const double> primal, std::span<const double> primal_star,
                            std::span<const double> dual, std::span<const double> dual_star, double tau,
                            double sigma) {
  const double a = dist(primal, primal_star);
  const double b = dist(dual, dual_star);
  return std::sqrt(a * a / (2.0 * tau) + b * b / (2.0 * sigma));
}

inline std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

struct TheoryRun {
  double worst_bound_ratio = 0.0;    // max over iterates of dist / Lemma-1 bound
  double worst_average_ratio = 0.0;  // max over restarts of ||z_avg - z*|| / (2 ||z0 - z*|| + slack)
  double contraction = 0.0;          // geometric-mean ratio of consecutive restart distances
  double monotone_fraction = 0.0;    // share of consecutive restart pairs with nonincreasing distance
};

// Restarted iterations with fixed theory steps. `Step` advances the state by
// one iteration, `Point` returns (primal, dual) of the current or averaged
// iterate, `Restart` moves to the average.
template <class Step, class Point, class Restart>
TheoryRun theory_run(const SuiteOptions& opt, double tau, double sigma, double L_exact,
                     const std::vector<double>& primal_star, const std::vector<double>& dual_star, Step&& step,
                     Point&& point, Restart&& restart) {
  TheoryRun out;
  const double c = 1.0 / std::sqrt(1.0 - sigma * tau * L_exact * L_exact);
  const double slack_w = kOracleSlack * std::sqrt(1.0 / (2.0 * tau) + 1.0 / (2.0 * sigma));
  std::vector<double> restart_dist;
  for (int n = 0; n < opt.restarts; ++n) {
    auto [x0, p0] = point(false);
    const double d0w = weighted_dist(x0, primal_star, p0, dual_star, tau, sigma);
    const double d0 = dist(concat(x0, p0), concat(primal_star, dual_star));
    restart_dist.push_back(d0);
    for (std::int64_t k = 0; k < opt.restart_length; ++k) {
      step();
      auto [x, p] = point(false);
      const double dk = weighted_dist(x, primal_star, p, dual_star, tau, sigma);
      out.worst_bound_ratio = std::max(out.worst_bound_ratio, dk / (c * d0w + (c + 1.0) * slack_w));
    }
    auto [xa, pa] = point(true);
    const double da = dist(concat(xa, pa), concat(primal_star, dual_star));
    out.worst_average_ratio = std::max(out.worst_average_ratio, da / (2.0 * d0 + 3.0 * kOracleSlack));
    restart();
  }
  int monotone = 0;
  double log_sum = 0.0;
  int pairs = 0;
  for (std::size_t k = 1; k < restart_dist.size(); ++k) {
    if (restart_dist[k] <= restart_dist[k - 1] + kOracleSlack) ++monotone;
    if (restart_dist[k - 1] > 10.0 * kOracleSlack && restart_dist[k] > 10.0 * kOracleSlack) {
      log_sum += std::log(restart_dist[k] / restart_dist[k - 1]);
      ++pairs;
    }
  }
  out.monotone_fraction = restart_dist.size() > 1 ? static_cast<double>(monotone) / static_cast<double>(restart_dist.size() - 1) : 1.0;
  out.contraction = pairs > 0 ? std::exp(log_sum / pairs) : 0.0;
  return out;
}

inline void theory_checks(const FisherInstance& inst, const oracle::Equilibrium& star, const SuiteOptions& opt,
                          const std::string& label, std::vector<PropertyCheck>& out) {
  const auto& u = inst.utilities;

  // Compact (PDHCG) iterates z = (x, p).
  {
    const double L_est = op_norm_estimate(ColumnSumOperator{u}, SolverConfig{}.power_iterations);
    Offset widest = 0;
    for (Index j = 0; j < u.cols(); ++j) widest = std::max(widest, u.column_nnz(j));
    const double L_exact = std::sqrt(static_cast<double>(widest));
    const StepSizes steps{opt.step_scale / L_est, opt.step_scale / L_est};
    const double stl2 = steps.sigma * steps.tau * L_exact * L_exact;
    if (!(stl2 < 1.0)) {
      out.push_back(skipped("boundedness", label + " pdhcg", "sigma tau L^2 = " + std::to_string(stl2) + " >= 1"));
      out.push_back(skipped("average_bound", label + " pdhcg", "steps are not the theory choice"));
    } else {
      CompactState s = initial_compact_state(inst);
      std::vector<double> scratch;
      std::vector<int> passes;
      const SectionSearchOptions search;
      auto run = theory_run(
          opt, steps.tau, steps.sigma, L_exact, star.x, star.p,
          [&] { compact_iteration(inst, s, steps, search, scratch, passes); },
          [&](bool avg) { return avg ? std::pair{s.avg_x, s.avg_p} : std::pair{s.x, s.p}; },
          [&] { restart_to_average(s); });
      const std::string note = "contraction " + std::to_string(run.contraction) + ", monotone restarts " +
                               std::to_string(run.monotone_fraction);
      out.push_back(judge("boundedness", label + " pdhcg", run.worst_bound_ratio, 1.0, note));
      out.push_back(judge("average_bound", label + " pdhcg", run.worst_average_ratio, 1.0, note));
    }
  }

  // Lifted (PDHG) iterates z = ((x, t), (p, y)).
  {
    const LiftedOperator op{u};
    const double L_est = op_norm_estimate(op, SolverConfig{}.power_iterations);
    const double L_exact = exact_norm(op);
    const StepSizes steps{opt.step_scale / L_est, opt.step_scale / L_est};
    const double stl2 = steps.sigma * steps.tau * L_exact * L_exact;
    if (!(stl2 < 1.0)) {
      out.push_back(skipped("boundedness", label + " pdhg", "sigma tau L^2 = " + std::to_string(stl2) + " >= 1"));
      out.push_back(skipped("average_bound", label + " pdhg", "steps are not the theory choice"));
      return;
    }
    std::vector<double> t_star = utility_levels(u, star.x);
    std::vector<double> y_star(t_star.size());
    for (std::size_t i = 0; i < t_star.size(); ++i) y_star[i] = inst.budgets[i] / t_star[i];
    const auto primal_star = concat(star.x, t_star);
    const auto dual_star = concat(star.p, y_star);
    LiftedState s = initial_lifted_state(inst);
    auto run = theory_run(
        opt, steps.tau, steps.sigma, L_exact, primal_star, dual_star, [&] { lifted_iteration(inst, s, steps); },
        [&](bool avg) {
          return avg ? std::pair{concat(s.avg_x, s.avg_t), concat(s.avg_p, s.avg_y)}
                     : std::pair{concat(s.x, s.t), concat(s.p, s.y)};
        },
        [&] { restart_to_average(s); });
    const std::string note = "contraction " + std::to_string(run.contraction) + ", monotone restarts " +
                             std::to_string(run.monotone_fraction);
    out.push_back(judge("boundedness", label + " pdhg", run.worst_bound_ratio, 1.0, note));
    out.push_back(judge("average_bound", label + " pdhg", run.worst_average_ratio, 1.0, note));
  }
}

inline void price_checks(const FisherInstance& inst, const oracle::Equilibrium& star, const std::string& label,
                         std::vector<PropertyCheck>& out) {
  SolverConfig cfg;
  cfg.tolerance = 1e-8;
  const SolveReport a = solve_fisher_pdhcg(inst, cfg);
  const SolveReport b = solve_fisher_pdhg(inst, cfg);
  if (a.status != Status::optimal || b.status != Status::optimal) {
    out.push_back({"prices", label, Outcome::fail, 0.0, 0.0, "a solver did not reach tolerance 1e-8"});
    return;
  }
  out.push_back(judge("prices", label + " pdhcg-vs-oracle", rel_inf_diff(a.solution.p, star.p), 1e-4));
  out.push_back(judge("prices", label + " pdhg-vs-pdhcg", rel_inf_diff(b.solution.p, a.solution.p), 1e-3));
}

inline void gap_checks(const FisherInstance& inst, const oracle::Equilibrium& star, const SuiteOptions& opt,
                       std::uint64_t seed, const std::string& label, std::vector<PropertyCheck>& out) {
  const auto& u = inst.utilities;
  std::mt19937_64 rng(seed);
  const double at_centre = smoothed_gap(inst, star.x, star.p, star.x, star.p, opt.xi);
  out.push_back(judge("gap_nonneg", label + " at-centre", std::abs(at_centre), 1e-8));

  double worst = std::numeric_limits<double>::infinity();
  double alpha = std::numeric_limits<double>::infinity();
  for (int k = 0; k < opt.gap_samples; ++k) {
    std::vector<double> x = uniform_vector(rng, static_cast<std::size_t>(u.nnz()), 0.0, 1.0);
    std::vector<double> p = star.p;
    std::normal_distribution<double> noise(0.0, 0.5);
    for (double& v : p) v += noise(rng);
    const double g = smoothed_gap(inst, x, p, star.x, star.p, opt.xi);
    worst = std::min(worst, g);
    // dist(z, Z*) uses p* and the column-sum infeasibility of x; x* need not be unique.
    const auto cs = column_sums(u, x);
    double d2 = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) d2 += (p[j] - star.p[j]) * (p[j] - star.p[j]) + (cs[j] - 1.0) * (cs[j] - 1.0);
    if (d2 > 0.0) alpha = std::min(alpha, g / d2);
  }
  out.push_back(judge("gap_nonneg", label + " random-z", -worst, 1e-9,
                      "min gap " + std::to_string(worst) + ", empirical growth constant " + std::to_string(alpha)));
}

inline void gap_grid_check(const FisherInstance& inst, const oracle::Equilibrium& star, const SuiteOptions& opt,
                           std::uint64_t seed, const std::string& label, std::vector<PropertyCheck>& out) {
  const auto& u = inst.utilities;
  const Dense ud = to_dense(u);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  double worst = 0.0;
  for (int k = 0; k < 6; ++k) {
    std::vector<double> x = uniform_vector(rng, static_cast<std::size_t>(u.nnz()), 0.1, 1.2);
    std::vector<double> p = uniform_vector(rng, static_cast<std::size_t>(u.cols()), -0.5, 1.5);
    std::vector<double> cx = star.x, cp = star.p;
    if (k % 2 == 1) {
      cx = uniform_vector(rng, cx.size(), 0.0, 1.0);
      cp = uniform_vector(rng, cp.size(), 0.0, 1.0);
    }
    const double lib = smoothed_gap(inst, x, p, cx, cp, opt.xi);
    const double ref = grid::smoothed_gap(ud, inst.budgets, pattern_to_dense(u, x), p, pattern_to_dense(u, cx), cp, opt.xi);
    worst = std::max(worst, std::abs(lib - ref));
  }
  out.push_back(judge("gap_grid", label, worst, 1e-4));
}

inline void permutation_check(const FisherInstance& inst, std::uint64_t seed, const std::string& label,
                              std::vector<PropertyCheck>& out) {
  std::mt19937_64 rng(seed);
  std::vector<Index> rows(static_cast<std::size_t>(inst.buyers())), cols(static_cast<std::size_t>(inst.goods()));
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  std::shuffle(cols.begin(), cols.end(), rng);
  const FisherInstance other = permuted(inst, rows, cols);
  SolverConfig cfg;
  // Below about 1e-10 step acceptance is decided by rounding noise, so the
  // runs stop above it.
  cfg.tolerance = 1e-9;
  cfg.max_iterations = 5000;
  const SolveReport a = solve_fisher_pdhcg(inst, cfg);
  const SolveReport b = solve_fisher_pdhcg(other, cfg);
  // Relabelling changes summation order and hence the k-section bracket
  // path, so iterates agree only to the subproblem tolerance. Differences are
  // measured in units of 1e-8 absolute plus 1e-6 relative.
  auto units = [](double a, double b) { return std::abs(a - b) / (1e-8 + 1e-6 * std::abs(a)); };
  double worst = a.residual_history.size() == b.residual_history.size() ? 0.0 : 2.0;
  for (std::size_t k = 0; worst <= 1.0 && k < a.residual_history.size(); ++k) {
    if (a.residual_history[k].iteration != b.residual_history[k].iteration) worst = 2.0;
    worst = std::max(worst, units(a.residual_history[k].rel_kkt, b.residual_history[k].rel_kkt));
  }
  for (std::size_t c = 0; c < cols.size(); ++c) {
    worst = std::max(worst, units(a.solution.p[static_cast<std::size_t>(cols[c])], b.solution.p[c]));
  }
  out.push_back(judge("permutation", label, worst, 1.0));
}

inline void exchange_check(std::uint64_t seed, std::vector<PropertyCheck>& out) {
  GeneratorConfig g;
  g.n = 100;
  g.m = 40;
  g.sparsity_u = 0.2;
  g.sparsity_e = 0.5;
  g.seed = seed;
  const ExchangeInstance inst = generate_exchange(g);
  ExchangeConfig cfg;
  cfg.outer_tol = 1e-9;
  const FixedPointTrace tr = solve_exchange(inst, cfg);
  if (tr.status != Status::optimal) {
    out.push_back({"exchange_decay", "100x40", Outcome::fail, 0.0, 0.0, "fixed point iteration did not converge"});
    return;
  }
  // ratios gap_{k+1} / gap_k for k >= 2 (gaps counted from 1)
  int below = 0, total = 0;
  for (std::size_t k = 2; k < tr.budget_gaps.size(); ++k) {
    ++total;
    if (tr.budget_gaps[k] < tr.budget_gaps[k - 1]) ++below;
  }
  if (total == 0) {
    out.push_back(skipped("exchange_decay", "100x40", "converged before a ratio past k = 2 existed"));
    return;
  }
  const double frac = static_cast<double>(below) / total;
  out.push_back(judge("exchange_decay", "100x40", 1.0 - frac, 0.1,
                      std::to_string(below) + " of " + std::to_string(total) + " ratios below one, " +
                          std::to_string(tr.outer_iterations) + " outer iterations"));
}

}  // namespace detail

inline PropertyReport run_property_suite(std::uint64_t seed, const std::vector<SuiteSize>& sizes,
                                         const SuiteOptions& opt = {}) {
  PropertyReport rep;
  rep.seed = seed;
  for (std::size_t idx = 0; idx < sizes.size(); ++idx) {
    const SuiteSize sz = sizes[idx];
    const std::string label = detail::size_label(sz);
    const double q = sz.n * sz.m <= 15 ? 1.0 : 0.3;
    const std::uint64_t inst_seed = seed * 1000 + idx;
    const FisherInstance inst = small_random(sz.n, sz.m, q, inst_seed);

    oracle::BruteForceOptions bf;
    bf.tol = 1e-12;
    bf.max_nonzeros = inst.utilities.nnz();
    const auto star = oracle::brute_force_fisher(inst, bf);
    if (!star) {
      for (const char* f : {"boundedness", "average_bound", "prices", "gap_nonneg", "gap_grid"}) {
        rep.checks.push_back(detail::skipped(f, label, "oracle unavailable"));
      }
    } else {
      detail::theory_checks(inst, *star, opt, label, rep.checks);
      detail::price_checks(inst, *star, label, rep.checks);
      detail::gap_checks(inst, *star, opt, inst_seed, label, rep.checks);
      if (sz.m <= 2) detail::gap_grid_check(inst, *star, opt, inst_seed, label, rep.checks);
    }
    detail::permutation_check(inst, inst_seed, label, rep.checks);
  }

  // A 3x2 market with one missing utility exercises the off-pattern terms.
  {
    const FisherInstance sparse = dense_instance({{1.0, 0.0}, {0.4, 0.9}, {0.7, 0.2}}, {0.5, 0.3, 0.8});
    oracle::BruteForceOptions bf;
    bf.tol = 1e-12;
    if (const auto star = oracle::brute_force_fisher(sparse, bf)) {
      detail::gap_grid_check(sparse, *star, opt, seed, "3x2 sparse", rep.checks);
    } else {
      rep.checks.push_back(detail::skipped("gap_grid", "3x2 sparse", "oracle unavailable"));
    }
  }
  if (opt.exchange) detail::exchange_check(seed, rep.checks);
  return rep;
}

}  // namespace market_eq::testing
