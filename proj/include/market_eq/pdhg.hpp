#pragma once

// Restarted PDHG on the lifted Eisenberg–Gale saddle problem
//
//   min_{x >= 0, t > 0} max_{p, y}  -sum_i w_i log t_i
//                                   + sum_j p_j (sum_i x_ij - 1)
//                                   + sum_i y_i (t_i - u_i^T x_i)
//
// Every step is closed form: a dual ascent step on (p, y) at the
// extrapolated primal point, then the proximal steps for t and x.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <span>
#include <vector>

#include "market_eq/driver.hpp"
#include "market_eq/instance.hpp"
#include "market_eq/kkt.hpp"
#include "market_eq/parallel.hpp"
#include "market_eq/report.hpp"
#include "market_eq/sparse.hpp"

namespace market_eq {

struct LiftedState {
  std::vector<double> x, t, p, y;
  std::vector<double> prev_x, prev_t;  // previous primal iterate, for 2x - x_prev
  std::vector<double> avg_x, avg_t, avg_p, avg_y;
  std::int64_t inner_count = 0;

  // Starts an inner loop at (x, t, p, y): prev = current, averages = current.
  void reset_inner() {
    prev_x = x;
    prev_t = t;
    avg_x = x;
    avg_t = t;
    avg_p = p;
    avg_y = y;
    inner_count = 0;
  }
};

// x_ij = 1 / nnz(column j), t = U x, p_j = sum(w) / m, y = w / t. Both
// equality constraints hold at this point.
inline LiftedState initial_lifted_state(const FisherInstance& inst) {
  const auto& u = inst.utilities;
  LiftedState s;
  s.x.resize(static_cast<std::size_t>(u.nnz()));
  const auto cols = u.col_indices();
  for (std::size_t k = 0; k < s.x.size(); ++k) {
    s.x[k] = 1.0 / static_cast<double>(u.column_nnz(cols[k]));
  }
  s.t = utility_levels(u, s.x);
  s.p.assign(static_cast<std::size_t>(u.cols()), inst.total_budget() / static_cast<double>(u.cols()));
  s.y.resize(s.t.size());
  for (std::size_t i = 0; i < s.t.size(); ++i) s.y[i] = inst.budgets[i] / s.t[i];
  s.reset_inner();
  return s;
}

// p_j += sigma (sum_i (2x - x_prev)_ij - 1)
// y_i += sigma ((2t - t_prev)_i - u_i^T (2x - x_prev)_i)
inline void dual_step(const FisherInstance& inst, LiftedState& s, const StepSizes& steps) {
  const auto& u = inst.utilities;
  const auto uv = u.values();
  parallel::for_each(u.cols(), [&](std::int64_t j) {
    double acc = 0.0;
    for (Offset e : u.column_entries(static_cast<Index>(j))) {
      const auto k = static_cast<std::size_t>(e);
      acc += 2.0 * s.x[k] - s.prev_x[k];
    }
    s.p[static_cast<std::size_t>(j)] += steps.sigma * (acc - 1.0);
  });
  parallel::for_each(u.rows(), [&](std::int64_t i) {
    const auto ii = static_cast<std::size_t>(i);
    double ux = 0.0;
    for (Offset e = u.row_begin(static_cast<Index>(i)); e < u.row_end(static_cast<Index>(i)); ++e) {
      const auto k = static_cast<std::size_t>(e);
      ux += uv[k] * (2.0 * s.x[k] - s.prev_x[k]);
    }
    s.y[ii] += steps.sigma * ((2.0 * s.t[ii] - s.prev_t[ii]) - ux);
  });
}

// Proximal step on -w log t + y t: the positive root of
// t^2 - (t_k - tau y) t - tau w = 0.
inline double t_update(double t_k, double y, double tau, double w) {
  const double b = t_k - tau * y;
  const double disc = std::sqrt(b * b + 4.0 * tau * w);
  // For b < 0 the textbook form cancels; use the product of roots instead.
  return b >= 0.0 ? 0.5 * (b + disc) : (2.0 * tau * w) / (disc - b);
}

inline void primal_step_t(LiftedState& s, const StepSizes& steps, std::span<const double> w) {
  s.prev_t = s.t;
  parallel::for_each(static_cast<std::int64_t>(s.t.size()), [&](std::int64_t i) {
    const auto ii = static_cast<std::size_t>(i);
    s.t[ii] = t_update(s.t[ii], s.y[ii], steps.tau, w[ii]);
  });
}

// x_ij = max(0, x_ij - tau (p_j - u_ij y_i)) on the stored pattern.
inline void primal_step_x(LiftedState& s, const StepSizes& steps, const SparseMatrix& u) {
  s.prev_x = s.x;
  const auto uv = u.values();
  const auto cols = u.col_indices();
  const auto rows_of = u.entry_rows();
  parallel::for_each(u.nnz(), [&](std::int64_t e) {
    const auto k = static_cast<std::size_t>(e);
    const double grad = s.p[static_cast<std::size_t>(cols[k])] - uv[k] * s.y[static_cast<std::size_t>(rows_of[k])];
    const double v = s.x[k] - steps.tau * grad;
    s.x[k] = v > 0.0 ? v : 0.0;
  });
}

// Folds the current iterate into the running average of iterates
// 1..inner_count; the starting point is not part of it.
inline void fold_lifted_average(LiftedState& s) {
  const std::int64_t k = s.inner_count;
  if (k == 0) {
    s.avg_x = s.x;
    s.avg_t = s.t;
    s.avg_p = s.p;
    s.avg_y = s.y;
  } else {
    detail::fold_average(s.avg_x, s.x, k);
    detail::fold_average(s.avg_t, s.t, k);
    detail::fold_average(s.avg_p, s.p, k);
    detail::fold_average(s.avg_y, s.y, k);
  }
  s.inner_count = k + 1;
}

// One full iteration: dual step, t and x steps, average update.
inline void lifted_iteration(const FisherInstance& inst, LiftedState& s, const StepSizes& steps) {
  dual_step(inst, s, steps);
  primal_step_t(s, steps, inst.budgets);
  primal_step_x(s, steps, inst.utilities);
  fold_lifted_average(s);
}

// K iterations from the current point. The state keeps the last and the
// averaged iterates.
inline void inner_loop(const FisherInstance& inst, LiftedState& s, const StepSizes& steps, std::int64_t K) {
  if (K < 1) throw std::invalid_argument("inner loop length must be at least 1");
  for (std::int64_t k = 0; k < K; ++k) lifted_iteration(inst, s, steps);
}

// Restart-to-average: the averaged iterate becomes the new starting point.
inline void restart_to_average(LiftedState& s) {
  s.x = s.avg_x;
  s.t = s.avg_t;
  s.p = s.avg_p;
  s.y = s.avg_y;
  s.reset_inner();
}

// The constraint operator of the lifted problem, (x, t) -> (colsum x, t - U x).
struct LiftedOperator {
  const SparseMatrix& u;
  std::int64_t input_dim() const { return u.nnz() + u.rows(); }
  std::int64_t output_dim() const { return u.cols() + u.rows(); }
  void apply(std::span<const double> in, std::span<double> out) const {
    const auto nnz = static_cast<std::size_t>(u.nnz());
    const auto m = static_cast<std::size_t>(u.cols());
    const auto x = in.first(nnz);
    const auto t = in.subspan(nnz);
    column_sums_into(u, x, out.first(m));
    const auto uv = u.values();
    for (Index i = 0; i < u.rows(); ++i) {
      double s = 0.0;
      for (Offset e = u.row_begin(i); e < u.row_end(i); ++e) {
        s += uv[static_cast<std::size_t>(e)] * x[static_cast<std::size_t>(e)];
      }
      out[m + static_cast<std::size_t>(i)] = t[static_cast<std::size_t>(i)] - s;
    }
  }
  void apply_adjoint(std::span<const double> in, std::span<double> out) const {
    const auto nnz = static_cast<std::size_t>(u.nnz());
    const auto m = static_cast<std::size_t>(u.cols());
    const auto cols = u.col_indices();
    const auto uv = u.values();
    const auto rows_of = u.entry_rows();
    for (std::size_t k = 0; k < nnz; ++k) {
      out[k] = in[static_cast<std::size_t>(cols[k])] - uv[k] * in[m + static_cast<std::size_t>(rows_of[k])];
    }
    for (Index i = 0; i < u.rows(); ++i) out[nnz + static_cast<std::size_t>(i)] = in[m + static_cast<std::size_t>(i)];
  }
};

// Driver policy for the lifted method. Termination residuals are measured on
// the original (unnormalized) instance: x and p carry over unchanged, while t
// and y are mapped back through the row scales.
class LiftedMethod {
 public:
  static constexpr bool kTracksPasses = false;

  LiftedMethod(const FisherInstance& original, const FisherInstance& scaled, std::vector<double> row_scales,
               LiftedState start)
      : original_(original), inst_(scaled), scales_(std::move(row_scales)), s_(std::move(start)) {
    anchor_ = s_;
  }

  double op_norm(int iters) const { return op_norm_estimate(LiftedOperator{inst_.utilities}, iters); }

  // Takes one step without folding it into the average and returns the
  // largest eta the step supports (+inf when the primal and dual moves do not
  // interact). accept() or reject() must follow.
  double attempt(const StepSizes& steps) {
    prev_p_ = s_.p;
    prev_y_ = s_.y;
    dual_step(inst_, s_, steps);
    // Keep the old extrapolation partners so that reject() can restore them.
    saved_prev_x_.swap(s_.prev_x);
    saved_prev_t_.swap(s_.prev_t);
    primal_step_t(s_, steps, inst_.budgets);
    primal_step_x(s_, steps, inst_.utilities);
    return step_bound(steps);
  }

  void accept() { fold_lifted_average(s_); }

  void reject() {
    s_.x.swap(s_.prev_x);
    s_.t.swap(s_.prev_t);
    s_.prev_x.swap(saved_prev_x_);
    s_.prev_t.swap(saved_prev_t_);
    s_.p.swap(prev_p_);
    s_.y.swap(prev_y_);
  }

  Residuals residuals(bool average) const {
    const Solution sol = solution(average);
    return residuals_lifted(original_, sol.x, sol.t, sol.p, sol.y);
  }

  RestartMove restart(bool to_average) {
    if (to_average) {
      restart_to_average(s_);
    } else {
      s_.reset_inner();
    }
    RestartMove mv;
    mv.primal = std::sqrt(dist2(s_.x, anchor_.x) + dist2(s_.t, anchor_.t));
    mv.dual = std::sqrt(dist2(s_.p, anchor_.p) + dist2(s_.y, anchor_.y));
    anchor_ = s_;
    return mv;
  }

  Solution solution(bool average) const {
    Solution out;
    out.x = average ? s_.avg_x : s_.x;
    out.p = average ? s_.avg_p : s_.p;
    out.t = average ? s_.avg_t : s_.t;
    out.y = average ? s_.avg_y : s_.y;
    for (std::size_t i = 0; i < out.t.size(); ++i) {
      out.t[i] /= scales_[i];
      out.y[i] *= scales_[i];
    }
    return out;
  }

  std::int64_t inner_count() const { return s_.inner_count; }
  std::int64_t last_passes() const { return 0; }
  const LiftedState& state() const { return s_; }

 private:
  static double dist2(const std::vector<double>& a, const std::vector<double>& b) {
    return parallel::sum(static_cast<std::int64_t>(a.size()), [&](std::int64_t i) {
      const double d = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
      return d * d;
    });
  }

  // Largest eta for which the last step satisfies
  //   eta <= (omega ||dz_primal||^2 + ||dz_dual||^2 / omega) / (2 |dz_dual^T K dz_primal|).
  double step_bound(const StepSizes& steps) const {
    const auto& u = inst_.utilities;
    const auto uv = u.values();
    const auto cols = u.col_indices();
    const auto rows_of = u.entry_rows();
    const double dx2 = dist2(s_.x, s_.prev_x) + dist2(s_.t, s_.prev_t);
    const double dd2 = dist2(s_.p, prev_p_) + dist2(s_.y, prev_y_);
    const double cross_x = parallel::sum(u.nnz(), [&](std::int64_t e) {
      const auto k = static_cast<std::size_t>(e);
      const auto j = static_cast<std::size_t>(cols[k]);
      const auto i = static_cast<std::size_t>(rows_of[k]);
      return (s_.x[k] - s_.prev_x[k]) * ((s_.p[j] - prev_p_[j]) - uv[k] * (s_.y[i] - prev_y_[i]));
    });
    const double cross_t = parallel::sum(u.rows(), [&](std::int64_t e) {
      const auto i = static_cast<std::size_t>(e);
      return (s_.t[i] - s_.prev_t[i]) * (s_.y[i] - prev_y_[i]);
    });
    const double cross = std::abs(cross_x + cross_t);
    if (cross == 0.0) return std::numeric_limits<double>::infinity();
    const double omega = std::sqrt(steps.sigma / steps.tau);
    return (omega * dx2 + dd2 / omega) / (2.0 * cross);
  }

  const FisherInstance& original_;
  const FisherInstance& inst_;
  std::vector<double> scales_;
  LiftedState s_;
  LiftedState anchor_;
  std::vector<double> prev_p_, prev_y_, saved_prev_x_, saved_prev_t_;
};

inline SolveReport solve_fisher_pdhg(const FisherInstance& inst, const SolverConfig& cfg = {}) {
  require_valid(inst);
  const NormalizedInstance scaled = cfg.normalize ? normalize(inst) : NormalizedInstance{inst, std::vector<double>(inst.budgets.size(), 1.0)};
  LiftedMethod method(inst, scaled.instance, scaled.row_scales, initial_lifted_state(scaled.instance));
  SolveReport report = run_restarted(method, cfg);
  report.solver = Algorithm::pdhg;
  report.row_scales = scaled.row_scales;
  report.instance_fingerprint = fingerprint(inst);
  return report;
}

}  // namespace market_eq
