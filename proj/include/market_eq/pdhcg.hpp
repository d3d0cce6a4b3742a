#pragma once

// Restarted PDHCG on the compact saddle problem
//
//   min_{x >= 0} max_p  -sum_i w_i log(u_i^T x_i) + sum_j p_j (sum_i x_ij - 1)
//
// The dual step is the p-part of the lifted PDHG step. The primal step solves
// each buyer's proximal subproblem exactly, rows in parallel.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "market_eq/driver.hpp"
#include "market_eq/instance.hpp"
#include "market_eq/kkt.hpp"
#include "market_eq/parallel.hpp"
#include "market_eq/report.hpp"
#include "market_eq/section_search.hpp"
#include "market_eq/sparse.hpp"

namespace market_eq {

struct CompactState {
  std::vector<double> x, p;
  std::vector<double> prev_x;
  std::vector<double> avg_x, avg_p;
  std::int64_t inner_count = 0;

  void reset_inner() {
    prev_x = x;
    avg_x = x;
    avg_p = p;
    inner_count = 0;
  }
};

inline CompactState initial_compact_state(const FisherInstance& inst) {
  const auto& u = inst.utilities;
  CompactState s;
  s.x.resize(static_cast<std::size_t>(u.nnz()));
  const auto cols = u.col_indices();
  for (std::size_t k = 0; k < s.x.size(); ++k) {
    s.x[k] = 1.0 / static_cast<double>(u.column_nnz(cols[k]));
  }
  s.p.assign(static_cast<std::size_t>(u.cols()), inst.total_budget() / static_cast<double>(u.cols()));
  s.reset_inner();
  return s;
}

// p_j += sigma (sum_i (2x - x_prev)_ij - 1)
inline void dual_step_compact(const FisherInstance& inst, CompactState& s, double sigma) {
  const auto& u = inst.utilities;
  parallel::for_each(u.cols(), [&](std::int64_t j) {
    double acc = 0.0;
    for (Offset e : u.column_entries(static_cast<Index>(j))) {
      const auto k = static_cast<std::size_t>(e);
      acc += 2.0 * s.x[k] - s.prev_x[k];
    }
    s.p[static_cast<std::size_t>(j)] += sigma * (acc - 1.0);
  });
}

// Solves every row subproblem at the current p, writing into x_next. Returns
// the total number of k-section passes.
inline std::int64_t primal_step_rows(const FisherInstance& inst, std::span<const double> x,
                                     std::span<const double> p, double tau, const SectionSearchOptions& search,
                                     std::span<double> x_next, std::vector<int>& passes) {
  const auto& u = inst.utilities;
  passes.resize(static_cast<std::size_t>(u.rows()));
  parallel::for_each(u.rows(), [&](std::int64_t i) {
    const auto row = static_cast<Index>(i);
    const auto b = static_cast<std::size_t>(u.row_begin(row));
    const auto len = static_cast<std::size_t>(u.row_nnz(row));
    const RowSolveResult r = solve_row_subproblem(x.subspan(b, len), p, tau, inst.budgets[static_cast<std::size_t>(i)],
                                                  u.row(row), search, x_next.subspan(b, len));
    passes[static_cast<std::size_t>(i)] = r.passes;
  });
  std::int64_t total = 0;
  for (int v : passes) total += v;
  return total;
}

inline void fold_compact_average(CompactState& s) {
  const std::int64_t k = s.inner_count;
  if (k == 0) {
    s.avg_x = s.x;
    s.avg_p = s.p;
  } else {
    detail::fold_average(s.avg_x, s.x, k);
    detail::fold_average(s.avg_p, s.p, k);
  }
  s.inner_count = k + 1;
}

// Dual step and exact primal row solves, without the average update. On
// return scratch holds the previous prev_x.
inline std::int64_t compact_step(const FisherInstance& inst, CompactState& s, const StepSizes& steps,
                                 const SectionSearchOptions& search, std::vector<double>& scratch,
                                 std::vector<int>& passes) {
  dual_step_compact(inst, s, steps.sigma);
  scratch.resize(s.x.size());
  const std::int64_t total_passes = primal_step_rows(inst, s.x, s.p, steps.tau, search, scratch, passes);
  s.prev_x.swap(s.x);
  s.x.swap(scratch);
  return total_passes;
}

// One iteration: dual step, exact primal row solves, average update.
inline std::int64_t compact_iteration(const FisherInstance& inst, CompactState& s, const StepSizes& steps,
                                      const SectionSearchOptions& search, std::vector<double>& scratch,
                                      std::vector<int>& passes) {
  const std::int64_t total_passes = compact_step(inst, s, steps, search, scratch, passes);
  fold_compact_average(s);
  return total_passes;
}

inline void restart_to_average(CompactState& s) {
  s.x = s.avg_x;
  s.p = s.avg_p;
  s.reset_inner();
}

// x -> column sums of x, on U's pattern.
struct ColumnSumOperator {
  const SparseMatrix& u;
  std::int64_t input_dim() const { return u.nnz(); }
  std::int64_t output_dim() const { return u.cols(); }
  void apply(std::span<const double> in, std::span<double> out) const { column_sums_into(u, in, out); }
  void apply_adjoint(std::span<const double> in, std::span<double> out) const {
    const auto cols = u.col_indices();
    for (std::size_t k = 0; k < cols.size(); ++k) out[k] = in[static_cast<std::size_t>(cols[k])];
  }
};

class CompactMethod {
 public:
  static constexpr bool kTracksPasses = true;

  CompactMethod(const FisherInstance& original, const FisherInstance& scaled, CompactState start,
                SectionSearchOptions search)
      : original_(original), inst_(scaled), s_(std::move(start)), search_(search) {
    anchor_x_ = s_.x;
    anchor_p_ = s_.p;
  }

  double op_norm(int iters) const { return op_norm_estimate(ColumnSumOperator{inst_.utilities}, iters); }

  // Takes one step without folding it into the average and returns the
  // largest eta the step supports. accept() or reject() must follow.
  double attempt(const StepSizes& steps) {
    prev_p_ = s_.p;
    last_passes_ = compact_step(inst_, s_, steps, search_, scratch_, passes_);
    return step_bound(steps);
  }

  void accept() { fold_compact_average(s_); }

  // compact_step left the old prev_x in scratch_.
  void reject() {
    s_.x.swap(s_.prev_x);
    s_.prev_x.swap(scratch_);
    s_.p.swap(prev_p_);
  }

  // Compact residuals are invariant under the row scaling, so the original
  // instance is used directly.
  Residuals residuals(bool average) const {
    return average ? residuals_compact(original_, s_.avg_x, s_.avg_p) : residuals_compact(original_, s_.x, s_.p);
  }

  RestartMove restart(bool to_average) {
    if (to_average) {
      restart_to_average(s_);
    } else {
      s_.reset_inner();
    }
    RestartMove mv;
    mv.primal = std::sqrt(dist2(s_.x, anchor_x_));
    mv.dual = std::sqrt(dist2(s_.p, anchor_p_));
    anchor_x_ = s_.x;
    anchor_p_ = s_.p;
    return mv;
  }

  Solution solution(bool average) const {
    Solution out;
    out.x = average ? s_.avg_x : s_.x;
    out.p = average ? s_.avg_p : s_.p;
    return out;
  }

  std::int64_t inner_count() const { return s_.inner_count; }
  std::int64_t last_passes() const { return last_passes_; }
  const CompactState& state() const { return s_; }

 private:
  static double dist2(const std::vector<double>& a, const std::vector<double>& b) {
    return parallel::sum(static_cast<std::int64_t>(a.size()), [&](std::int64_t i) {
      const double d = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
      return d * d;
    });
  }

  double step_bound(const StepSizes& steps) const {
    const auto cols = inst_.utilities.col_indices();
    const double dx2 = dist2(s_.x, s_.prev_x);
    const double dp2 = dist2(s_.p, prev_p_);
    const double cross = std::abs(parallel::sum(inst_.utilities.nnz(), [&](std::int64_t e) {
      const auto k = static_cast<std::size_t>(e);
      const auto j = static_cast<std::size_t>(cols[k]);
      return (s_.x[k] - s_.prev_x[k]) * (s_.p[j] - prev_p_[j]);
    }));
    if (cross == 0.0) return std::numeric_limits<double>::infinity();
    const double omega = std::sqrt(steps.sigma / steps.tau);
    return (omega * dx2 + dp2 / omega) / (2.0 * cross);
  }

  const FisherInstance& original_;
  const FisherInstance& inst_;
  CompactState s_;
  SectionSearchOptions search_;
  std::vector<double> anchor_x_, anchor_p_, prev_p_, scratch_;
  std::vector<int> passes_;
  std::int64_t last_passes_ = 0;
};

// warm_start, when given, must hold x on the utility pattern and p.
inline SolveReport solve_fisher_pdhcg(const FisherInstance& inst, const SolverConfig& cfg = {},
                                      const Solution* warm_start = nullptr) {
  require_valid(inst);
  const NormalizedInstance scaled =
      cfg.normalize ? normalize(inst) : NormalizedInstance{inst, std::vector<double>(inst.budgets.size(), 1.0)};
  CompactState start = initial_compact_state(scaled.instance);
  if (warm_start != nullptr) {
    if (warm_start->x.size() != start.x.size() || warm_start->p.size() != start.p.size()) {
      throw StructuralError("warm start does not match the instance");
    }
    start.x = warm_start->x;
    start.p = warm_start->p;
    start.reset_inner();
  }
  CompactMethod method(inst, scaled.instance, std::move(start), cfg.search);
  SolveReport report = run_restarted(method, cfg);
  report.solver = Algorithm::pdhcg;
  report.row_scales = scaled.row_scales;
  report.instance_fingerprint = fingerprint(inst);
  return report;
}

}  // namespace market_eq
