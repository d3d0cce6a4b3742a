#pragma once

// Optimality measures for the Eisenberg–Gale saddle point.
//
// Termination uses the relative primal residual, dual residual and
// complementarity gap of the lifted problem (x, t; p, y); compact iterates
// (x, p) are measured through t = U x, y = w / t. The scaled KKT residual and
// the smoothed duality gap are diagnostics only.
//
// Allocations x are stored on the utility pattern: x[k] belongs to entry k of
// inst.utilities, and x_ij = 0 wherever u_ij = 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "market_eq/instance.hpp"
#include "market_eq/parallel.hpp"
#include "market_eq/section_search.hpp"
#include "market_eq/sparse.hpp"

namespace market_eq {

struct Residuals {
  double r_primal = 0.0;
  double r_dual = 0.0;
  double r_gap = 0.0;
  double rel_kkt = 0.0;  // max of the three
};

namespace detail {

inline void check_lengths(const FisherInstance& inst, std::span<const double> x,
                          std::span<const double> p) {
  if (static_cast<Offset>(x.size()) != inst.utilities.nnz()) {
    throw StructuralError("allocation length " + std::to_string(x.size()) + " != nnz " +
                          std::to_string(inst.utilities.nnz()));
  }
  if (static_cast<Index>(p.size()) != inst.goods()) throw StructuralError("price vector length");
}

}  // namespace detail

// t_i = u_i^T x_i with x on the utility pattern.
inline void utility_levels_into(const SparseMatrix& u, std::span<const double> x, std::span<double> t) {
  const auto vals = u.values();
  parallel::for_each(u.rows(), [&](std::int64_t i) {
    double s = 0.0;
    for (Offset k = u.row_begin(static_cast<Index>(i)); k < u.row_end(static_cast<Index>(i)); ++k) {
      s += vals[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
    }
    t[static_cast<std::size_t>(i)] = s;
  });
}

inline std::vector<double> utility_levels(const SparseMatrix& u, std::span<const double> x) {
  std::vector<double> t(static_cast<std::size_t>(u.rows()));
  utility_levels_into(u, x, t);
  return t;
}

inline Residuals residuals_lifted(const FisherInstance& inst, std::span<const double> x,
                                  std::span<const double> t, std::span<const double> p,
                                  std::span<const double> y) {
  detail::check_lengths(inst, x, p);
  const auto& u = inst.utilities;
  const Index n = u.rows();
  const Index m = u.cols();
  if (static_cast<Index>(t.size()) != n || static_cast<Index>(y.size()) != n) {
    throw StructuralError("t / y length must equal the number of buyers");
  }
  for (Index i = 0; i < n; ++i) {
    if (!(t[static_cast<std::size_t>(i)] > 0.0)) {
      throw std::invalid_argument("residuals_lifted: t_" + std::to_string(i) + " is not positive");
    }
  }
  const auto uv = u.values();
  const auto rows_of = u.entry_rows();
  const auto& w = inst.budgets;
  auto at = [](std::span<const double> v, auto k) { return v[static_cast<std::size_t>(k)]; };

  const std::vector<double> ux = utility_levels(u, x);
  const std::vector<double> colsum = column_sums(u, x);

  // primal
  const double row_res = parallel::max(n, [&](std::int64_t i) { return std::abs(at(t, i) - ux[static_cast<std::size_t>(i)]); }, 0.0);
  const double col_res = parallel::max(m, [&](std::int64_t j) { return std::abs(colsum[static_cast<std::size_t>(j)] - 1.0); }, 0.0);
  const double col_mag = parallel::max(m, [&](std::int64_t j) { return std::abs(colsum[static_cast<std::size_t>(j)]); }, 0.0);
  Residuals r;
  r.r_primal = std::max(col_res, row_res) / (1.0 + std::max({col_mag, row_res, 1.0}));

  // dual: per good, p_j against the best bid max_i u_ij y_i over stored entries
  std::vector<double> slack(static_cast<std::size_t>(m));
  parallel::for_each(m, [&](std::int64_t j) {
    double best = -std::numeric_limits<double>::infinity();
    for (Offset e : u.column_entries(static_cast<Index>(j))) {
      best = std::max(best, at(uv, e) * at(y, rows_of[static_cast<std::size_t>(e)]));
    }
    slack[static_cast<std::size_t>(j)] = at(p, j) - best;
  });
  const double budget_res = parallel::max(n, [&](std::int64_t i) { return std::abs(w[static_cast<std::size_t>(i)] / at(t, i) - at(y, i)); }, 0.0);
  const double price_res = parallel::max(m, [&](std::int64_t j) { return std::max(0.0, -slack[static_cast<std::size_t>(j)]); }, 0.0);
  const double wt_mag = parallel::max(n, [&](std::int64_t i) { return std::abs(w[static_cast<std::size_t>(i)] / at(t, i)); }, 0.0);
  const double y_mag = parallel::max(n, [&](std::int64_t i) { return std::abs(at(y, i)); }, 0.0);
  const double slack_max = parallel::max(m, [&](std::int64_t j) { return slack[static_cast<std::size_t>(j)]; });
  r.r_dual = std::max(budget_res, price_res) / (1.0 + std::max({wt_mag, y_mag, slack_max}));

  // complementarity
  const auto cols = u.col_indices();
  const Offset nnz = u.nnz();
  auto reduced = [&](Offset k) {
    return std::max(0.0, at(p, cols[static_cast<std::size_t>(k)]) -
                             at(uv, k) * at(y, rows_of[static_cast<std::size_t>(k)]));
  };
  const double gap = parallel::max(nnz, [&](std::int64_t k) { return at(x, k) * reduced(k); }, 0.0);
  const double x_mag = parallel::max(nnz, [&](std::int64_t k) { return std::abs(at(x, k)); }, 0.0);
  const double red_mag = parallel::max(nnz, [&](std::int64_t k) { return reduced(k); }, 0.0);
  r.r_gap = gap / (1.0 + std::max(x_mag, red_mag));

  r.rel_kkt = std::max({r.r_primal, r.r_dual, r.r_gap});
  return r;
}

// Derived t = U x and y = w / t, then the lifted residuals.
inline Residuals residuals_compact(const FisherInstance& inst, std::span<const double> x,
                                   std::span<const double> p) {
  detail::check_lengths(inst, x, p);
  std::vector<double> t = utility_levels(inst.utilities, x);
  std::vector<double> y(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0)) {
      throw std::invalid_argument("buyer " + std::to_string(i) + " has zero utility value");
    }
    y[i] = inst.budgets[i] / t[i];
  }
  return residuals_lifted(inst, x, t, p, y);
}

// Euclidean norm of the stacked scaled KKT residual
//   (t_i y_i - w_i)_i, (x_ij - [x_ij - (p_j - u_ij y_i)/xi]_+)_ij,
//   ([p_j - u_ij y_i]_-)_ij, (sum_i x_ij - 1)_j, (t_i - u_i^T x_i)_i
// with (i,j) ranging over the stored pattern.
inline double scaled_kkt_residual(const FisherInstance& inst, std::span<const double> x,
                                  std::span<const double> t, std::span<const double> p,
                                  std::span<const double> y, double xi) {
  if (!(xi > 0.0)) throw std::invalid_argument("xi must be positive");
  detail::check_lengths(inst, x, p);
  const auto& u = inst.utilities;
  const auto uv = u.values();
  const auto cols = u.col_indices();
  const auto rows_of = u.entry_rows();
  const std::vector<double> ux = utility_levels(u, x);
  const std::vector<double> colsum = column_sums(u, x);

  const double budget_part = parallel::sum(u.rows(), [&](std::int64_t i) {
    const auto ii = static_cast<std::size_t>(i);
    const double a = t[ii] * y[ii] - inst.budgets[ii];
    const double b = t[ii] - ux[ii];
    return a * a + b * b;
  });
  const double entry_part = parallel::sum(u.nnz(), [&](std::int64_t k) {
    const auto kk = static_cast<std::size_t>(k);
    const double red = p[static_cast<std::size_t>(cols[kk])] - uv[kk] * y[static_cast<std::size_t>(rows_of[kk])];
    const double comp = x[kk] - std::max(0.0, x[kk] - red / xi);
    const double neg = std::max(0.0, -red);
    return comp * comp + neg * neg;
  });
  const double col_part = parallel::sum(u.cols(), [&](std::int64_t j) {
    const double d = colsum[static_cast<std::size_t>(j)] - 1.0;
    return d * d;
  });
  return std::sqrt(budget_part + entry_part + col_part);
}

inline double scaled_kkt_residual_compact(const FisherInstance& inst, std::span<const double> x,
                                          std::span<const double> p, double xi) {
  std::vector<double> t = utility_levels(inst.utilities, x);
  std::vector<double> y(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) y[i] = inst.budgets[i] / t[i];
  return scaled_kkt_residual(inst, x, t, p, y, xi);
}

// Smoothed duality gap G_xi(z; center) of the compact saddle function
//   L(x, p) = -sum_i w_i log(u_i^T x_i) + sum_j p_j (sum_i x_ij - 1)
// over x >= 0 (all n*m entries, not just the pattern) and free p.
//
// The p-maximization is a closed-form quadratic; the x-part splits into the
// buyers' proximal subproblems with step 1/xi, solved by k-section search.
// Off-pattern entries contribute min_{v>=0} p_j v + xi v^2 / 2 each.
inline double smoothed_gap(const FisherInstance& inst, std::span<const double> x,
                           std::span<const double> p, std::span<const double> center_x,
                           std::span<const double> center_p, double xi,
                           const SectionSearchOptions& search = {}) {
  if (!(xi > 0.0)) throw std::invalid_argument("xi must be positive");
  detail::check_lengths(inst, x, p);
  detail::check_lengths(inst, center_x, center_p);
  const auto& u = inst.utilities;
  const Index n = u.rows();
  const Index m = u.cols();

  const std::vector<double> ux = utility_levels(u, x);
  const std::vector<double> colsum = column_sums(u, x);
  double primal_side = 0.0;  // max over p_hat
  for (Index i = 0; i < n; ++i) {
    if (!(ux[static_cast<std::size_t>(i)] > 0.0)) {
      throw std::invalid_argument("smoothed_gap: buyer " + std::to_string(i) + " has zero utility value");
    }
    primal_side -= inst.budgets[static_cast<std::size_t>(i)] * std::log(ux[static_cast<std::size_t>(i)]);
  }
  for (Index j = 0; j < m; ++j) {
    const double g = colsum[static_cast<std::size_t>(j)] - 1.0;
    primal_side += center_p[static_cast<std::size_t>(j)] * g + g * g / (2.0 * xi);
  }

  // max over x_hat of -L(x_hat, p) - xi/2 ||x_hat - center_x||^2
  const double tau = 1.0 / xi;
  std::vector<double> xhat(static_cast<std::size_t>(u.nnz()));
  double dual_side = 0.0;
  for (Index i = 0; i < n; ++i) {
    const auto b = static_cast<std::size_t>(u.row_begin(i));
    const auto len = static_cast<std::size_t>(u.row_nnz(i));
    const RowView row = u.row(i);
    auto xr = std::span<double>(xhat).subspan(b, len);
    auto cr = center_x.subspan(b, len);
    const double w = inst.budgets[static_cast<std::size_t>(i)];
    solve_row_subproblem(cr, p, tau, w, row, search, xr);
    dual_side -= row_objective(xr, cr, p, tau, w, row);
  }
  for (Index j = 0; j < m; ++j) {
    const double pj = p[static_cast<std::size_t>(j)];
    dual_side += pj;
    const double neg = std::max(0.0, -pj);
    const auto off_pattern = static_cast<double>(n - u.column_nnz(j));
    dual_side += off_pattern * neg * neg / (2.0 * xi);
  }
  return primal_side + dual_side;
}

}  // namespace market_eq
