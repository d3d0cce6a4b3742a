#pragma once

// Small helpers shared by the test binaries: dense views of sparse data,
// random states and vector comparisons.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "market_eq/market_eq.hpp"

namespace market_eq::testing {

using Dense = std::vector<std::vector<double>>;

inline FisherInstance dense_instance(const Dense& u, std::vector<double> w) {
  return {SparseMatrix::from_dense(u), std::move(w)};
}

inline Dense to_dense(const SparseMatrix& M) {
  Dense d(static_cast<std::size_t>(M.rows()), std::vector<double>(static_cast<std::size_t>(M.cols()), 0.0));
  for (Index i = 0; i < M.rows(); ++i) {
    const RowView r = M.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) d[static_cast<std::size_t>(i)][static_cast<std::size_t>(r.cols[k])] = r.values[k];
  }
  return d;
}

// Entry values on M's pattern laid out as a dense n x m array.
inline Dense pattern_to_dense(const SparseMatrix& M, std::span<const double> entries) {
  Dense d(static_cast<std::size_t>(M.rows()), std::vector<double>(static_cast<std::size_t>(M.cols()), 0.0));
  for (Index i = 0; i < M.rows(); ++i) {
    for (Offset k = M.row_begin(i); k < M.row_end(i); ++k) {
      d[static_cast<std::size_t>(i)][static_cast<std::size_t>(M.col_indices()[static_cast<std::size_t>(k)])] =
          entries[static_cast<std::size_t>(k)];
    }
  }
  return d;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// ||a - b||_inf / ||b||_inf
inline double rel_inf_diff(std::span<const double> a, std::span<const double> b) {
  return max_abs_diff(a, b) / std::max(max_abs(b), 1e-300);
}

inline double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline FisherInstance small_random(Index n, Index m, double q, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.sparsity_u = q;
  cfg.seed = seed;
  return generate_fisher(cfg);
}

// Relabels buyers by row_perm (new row r is old row row_perm[r]) and goods
// by col_perm likewise.
inline FisherInstance permuted(const FisherInstance& inst, const std::vector<Index>& row_perm,
                               const std::vector<Index>& col_perm) {
  const auto& u = inst.utilities;
  std::vector<Index> col_new(col_perm.size());
  for (std::size_t c = 0; c < col_perm.size(); ++c) col_new[static_cast<std::size_t>(col_perm[c])] = static_cast<Index>(c);
  std::vector<Triplet> t;
  std::vector<double> w(inst.budgets.size());
  for (std::size_t r = 0; r < row_perm.size(); ++r) {
    const Index old = row_perm[r];
    w[r] = inst.budgets[static_cast<std::size_t>(old)];
    const RowView row = u.row(old);
    for (std::size_t k = 0; k < row.size(); ++k) {
      t.push_back({static_cast<Index>(r), col_new[static_cast<std::size_t>(row.cols[k])], row.values[k]});
    }
  }
  return {SparseMatrix::from_triplets(u.rows(), u.cols(), std::move(t)), std::move(w)};
}

}  // namespace market_eq::testing
