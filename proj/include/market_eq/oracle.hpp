#pragma once

// Ground truth for tests: closed-form equilibria of structured markets and a
// slow projected-gradient solver for tiny random ones. Nothing here shares
// update code with the saddle-point solvers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "market_eq/instance.hpp"
#include "market_eq/kkt.hpp"
#include "market_eq/sparse.hpp"

namespace market_eq::oracle {

struct Equilibrium {
  std::vector<double> x;  // on the utility pattern
  std::vector<double> p;
};

enum class Kind { single_good, single_buyer, uniform_utility };

// single_good: m = 1, p = sum(w), x_i = w_i / sum(w).
// single_buyer: n = 1, the buyer takes everything, p_j = w u_j / sum(u).
// uniform_utility: dense U with one common value, p_j = sum(w) / m,
// x_ij = w_i / sum(w).
inline Equilibrium analytic_equilibrium(const FisherInstance& inst, Kind kind) {
  require_valid(inst);
  const auto& u = inst.utilities;
  const double total = inst.total_budget();
  Equilibrium eq;
  eq.x.resize(static_cast<std::size_t>(u.nnz()));
  eq.p.resize(static_cast<std::size_t>(u.cols()));
  const auto rows_of = u.entry_rows();
  switch (kind) {
    case Kind::single_good:
      if (u.cols() != 1) throw std::invalid_argument("single_good needs exactly one good");
      eq.p[0] = total;
      for (std::size_t k = 0; k < eq.x.size(); ++k) eq.x[k] = inst.budgets[static_cast<std::size_t>(rows_of[k])] / total;
      return eq;
    case Kind::single_buyer: {
      if (u.rows() != 1) throw std::invalid_argument("single_buyer needs exactly one buyer");
      const auto vals = u.values();
      const double usum = std::accumulate(vals.begin(), vals.end(), 0.0);
      const auto cols = u.col_indices();
      for (std::size_t k = 0; k < eq.x.size(); ++k) {
        eq.x[k] = 1.0;
        eq.p[static_cast<std::size_t>(cols[k])] = inst.budgets[0] * vals[k] / usum;
      }
      return eq;
    }
    case Kind::uniform_utility: {
      if (u.nnz() != static_cast<Offset>(u.rows()) * u.cols()) {
        throw std::invalid_argument("uniform_utility needs a dense utility matrix");
      }
      const auto vals = u.values();
      for (double v : vals) {
        if (v != vals[0]) throw std::invalid_argument("uniform_utility needs one common utility value");
      }
      std::fill(eq.p.begin(), eq.p.end(), total / static_cast<double>(u.cols()));
      for (std::size_t k = 0; k < eq.x.size(); ++k) eq.x[k] = inst.budgets[static_cast<std::size_t>(rows_of[k])] / total;
      return eq;
    }
  }
  throw std::invalid_argument("unsupported analytic market kind");
}

// Euclidean projection of v onto {z >= 0, sum z = 1}.
inline void project_simplex(std::vector<double>& v) {
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cum += sorted[k];
    const double cand = (cum - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - cand > 0.0) theta = cand;
  }
  for (double& z : v) z = std::max(0.0, z - theta);
}

struct BruteForceOptions {
  double tol = 1e-8;             // on the relative KKT error
  std::int64_t max_iters = 2000000;
  Offset max_nonzeros = 12;      // the method is meant for tiny markets only
};

// Maximizes sum_i w_i log(u_i^T x_i) over x >= 0 on the pattern with unit
// column sums by projected gradient ascent with backtracking. Prices come
// from stationarity, p_j = max_i u_ij w_i / t_i. Returns nullopt when the
// tolerance is not reached within the iteration budget.
inline std::optional<Equilibrium> brute_force_fisher(const FisherInstance& inst, const BruteForceOptions& opt = {}) {
  require_valid(inst);
  const auto& u = inst.utilities;
  if (u.nnz() > opt.max_nonzeros) {
    throw std::invalid_argument("brute_force_fisher is limited to " + std::to_string(opt.max_nonzeros) + " nonzeros");
  }
  const auto nnz = static_cast<std::size_t>(u.nnz());
  const auto vals = u.values();
  const auto rows_of = u.entry_rows();
  const auto n = static_cast<std::size_t>(u.rows());
  const auto m = static_cast<std::size_t>(u.cols());

  auto levels = [&](const std::vector<double>& x) {
    std::vector<double> t(n, 0.0);
    for (std::size_t k = 0; k < nnz; ++k) t[static_cast<std::size_t>(rows_of[k])] += vals[k] * x[k];
    return t;
  };
  auto project = [&](std::vector<double>& x) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto entries = u.column_entries(static_cast<Index>(j));
      std::vector<double> col(entries.size());
      for (std::size_t a = 0; a < entries.size(); ++a) col[a] = x[static_cast<std::size_t>(entries[a])];
      project_simplex(col);
      for (std::size_t a = 0; a < entries.size(); ++a) x[static_cast<std::size_t>(entries[a])] = col[a];
    }
  };
  auto prices_of = [&](const std::vector<double>& x) {
    const auto t = levels(x);
    std::vector<double> p(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      for (Offset e : u.column_entries(static_cast<Index>(j))) {
        const auto k = static_cast<std::size_t>(e);
        const auto i = static_cast<std::size_t>(rows_of[k]);
        p[j] = std::max(p[j], vals[k] * inst.budgets[i] / t[i]);
      }
    }
    return p;
  };

  std::vector<double> x(nnz);
  for (std::size_t j = 0; j < m; ++j) {
    const auto entries = u.column_entries(static_cast<Index>(j));
    for (Offset e : entries) x[static_cast<std::size_t>(e)] = 1.0 / static_cast<double>(entries.size());
  }
  double step = 1.0;
  std::vector<double> grad(nnz), trial(nnz);
  for (std::int64_t it = 0; it < opt.max_iters; ++it) {
    const auto t = levels(x);
    for (std::size_t k = 0; k < nnz; ++k) {
      const auto i = static_cast<std::size_t>(rows_of[k]);
      grad[k] = inst.budgets[i] * vals[k] / t[i];
    }
    // Backtrack until the step is below the inverse local Lipschitz constant
    // of the gradient. The test compares gradients, not objective values, so
    // it keeps working after the objective change falls below rounding.
    step *= 2.0;
    for (;;) {
      for (std::size_t k = 0; k < nnz; ++k) trial[k] = x[k] + step * grad[k];
      project(trial);
      const auto tt = levels(trial);
      bool positive = true;
      for (double v : tt) positive = positive && v > 0.0;
      if (positive) {
        double dg = 0.0;
        double dist = 0.0;
        for (std::size_t k = 0; k < nnz; ++k) {
          const auto i = static_cast<std::size_t>(rows_of[k]);
          const double g = inst.budgets[i] * vals[k] / tt[i] - grad[k];
          dg += g * g;
          dist += (trial[k] - x[k]) * (trial[k] - x[k]);
        }
        if (step * step * dg <= dist || step < 1e-300) break;
      }
      step *= 0.5;
    }
    x.swap(trial);
    if (it % 16 == 0) {
      const auto p = prices_of(x);
      if (residuals_compact(inst, x, p).rel_kkt < opt.tol) return Equilibrium{x, p};
    }
  }
  const auto p = prices_of(x);
  if (residuals_compact(inst, x, p).rel_kkt < opt.tol) return Equilibrium{x, p};
  return std::nullopt;
}

}  // namespace market_eq::oracle
