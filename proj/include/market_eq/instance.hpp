#pragma once

// Market data model: Fisher markets (utilities + budgets) and exchange
// markets (utilities + endowments), their validation, per-buyer utility
// normalization, and the synthetic generators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "market_eq/errors.hpp"
#include "market_eq/sparse.hpp"

namespace market_eq {

struct FisherInstance {
  SparseMatrix utilities;       // n buyers x m goods
  std::vector<double> budgets;  // length n, all > 0

  Index buyers() const { return utilities.rows(); }
  Index goods() const { return utilities.cols(); }
  double total_budget() const {
    double s = 0.0;
    for (double w : budgets) s += w;
    return s;
  }
  friend bool operator==(const FisherInstance&, const FisherInstance&) = default;
};

struct ExchangeInstance {
  SparseMatrix utilities;   // n agents x m goods
  SparseMatrix endowments;  // n x m, every column sums to one

  Index agents() const { return utilities.rows(); }
  Index goods() const { return utilities.cols(); }
  friend bool operator==(const ExchangeInstance&, const ExchangeInstance&) = default;
};

struct Violation {
  enum class Kind {
    dimension_mismatch,
    buyer_without_utility,
    good_unvalued,
    nonpositive_budget,
    endowment_column_sum,
    agent_without_endowment,
  };
  Kind kind;
  Index index;  // buyer or good id; -1 when not applicable
  std::string message;
};

namespace detail {

inline void check_utility_support(const SparseMatrix& u, std::vector<Violation>& out) {
  for (Index i = 0; i < u.rows(); ++i) {
    if (u.row_nnz(i) == 0) {
      out.push_back({Violation::Kind::buyer_without_utility, i,
                     "buyer " + std::to_string(i) + " values no good"});
    }
  }
  for (Index j = 0; j < u.cols(); ++j) {
    if (u.column_nnz(j) == 0) {
      out.push_back({Violation::Kind::good_unvalued, j, "good " + std::to_string(j) + " unvalued"});
    }
  }
}

}  // namespace detail

// Returns every violated assumption; an empty list means the instance is
// solvable.
inline std::vector<Violation> validate(const FisherInstance& inst) {
  std::vector<Violation> out;
  if (static_cast<Index>(inst.budgets.size()) != inst.utilities.rows()) {
    out.push_back({Violation::Kind::dimension_mismatch, -1,
                   "budget vector has " + std::to_string(inst.budgets.size()) + " entries for " +
                       std::to_string(inst.utilities.rows()) + " buyers"});
    return out;
  }
  detail::check_utility_support(inst.utilities, out);
  for (std::size_t i = 0; i < inst.budgets.size(); ++i) {
    if (!(inst.budgets[i] > 0.0) || !std::isfinite(inst.budgets[i])) {
      out.push_back({Violation::Kind::nonpositive_budget, static_cast<Index>(i),
                     "nonpositive budget for buyer " + std::to_string(i)});
    }
  }
  return out;
}

inline constexpr double kEndowmentSumTolerance = 1e-12;

inline std::vector<Violation> validate(const ExchangeInstance& inst) {
  std::vector<Violation> out;
  const auto& e = inst.endowments;
  if (e.rows() != inst.utilities.rows() || e.cols() != inst.utilities.cols()) {
    out.push_back({Violation::Kind::dimension_mismatch, -1, "endowment and utility shapes differ"});
    return out;
  }
  detail::check_utility_support(inst.utilities, out);
  const auto sums = column_sums(e, e.values());
  for (Index j = 0; j < e.cols(); ++j) {
    if (std::abs(sums[static_cast<std::size_t>(j)] - 1.0) > kEndowmentSumTolerance) {
      out.push_back({Violation::Kind::endowment_column_sum, j,
                     "endowment of good " + std::to_string(j) + " does not sum to one"});
    }
  }
  for (Index i = 0; i < e.rows(); ++i) {
    if (e.row_nnz(i) == 0) {
      out.push_back({Violation::Kind::agent_without_endowment, i,
                     "agent " + std::to_string(i) + " owns nothing and would have a zero budget"});
    }
  }
  return out;
}

template <class Instance>
void require_valid(const Instance& inst) {
  const auto v = validate(inst);
  if (!v.empty()) {
    std::string msg = "invalid instance: " + v.front().message;
    if (v.size() > 1) msg += " (+" + std::to_string(v.size() - 1) + " more)";
    throw ValidationError(msg);
  }
}

struct NormalizedInstance {
  FisherInstance instance;
  std::vector<double> row_scales;  // u_normalized(i, :) = row_scales[i] * u(i, :)
};

// Scales every buyer's utilities so that the largest is exactly one. A
// buyer's optimal bundle is invariant under this scaling, so equilibrium
// prices and allocations are unchanged.
inline NormalizedInstance normalize(const FisherInstance& inst) {
  require_valid(inst);
  const auto& u = inst.utilities;
  std::vector<double> scales(static_cast<std::size_t>(u.rows()), 1.0);
  std::vector<double> values(u.values().begin(), u.values().end());
  for (Index i = 0; i < u.rows(); ++i) {
    double mx = 0.0;
    for (double v : u.row(i).values) mx = std::max(mx, v);
    if (mx == 1.0) continue;
    const double s = 1.0 / mx;
    scales[static_cast<std::size_t>(i)] = s;
    for (Offset k = u.row_begin(i); k < u.row_end(i); ++k) {
      // Divide rather than multiply by s so the row maximum lands on 1.0 exactly.
      values[static_cast<std::size_t>(k)] /= mx;
    }
  }
  return {FisherInstance{u.with_values(std::move(values)), inst.budgets}, std::move(scales)};
}

struct GeneratorConfig {
  Index n = 1000;
  Index m = 400;
  double sparsity_u = 0.2;  // probability that u_ij is nonzero
  double sparsity_e = 0.5;  // same for endowments (exchange markets only)
  std::uint64_t seed = 0;
};

inline void check_config(const GeneratorConfig& cfg) {
  if (cfg.n < 1 || cfg.m < 1) throw std::invalid_argument("generator needs n, m >= 1");
  if (!(cfg.sparsity_u > 0.0 && cfg.sparsity_u <= 1.0)) {
    throw std::invalid_argument("utility sparsity must lie in (0, 1]");
  }
  if (!(cfg.sparsity_e > 0.0 && cfg.sparsity_e <= 1.0)) {
    throw std::invalid_argument("endowment sparsity must lie in (0, 1]");
  }
}

namespace detail {

// Uniform draws built directly from the 64-bit engine output so that a seed
// yields the same instance with every standard library.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // (0, 1): exact zeros are redrawn.
  double uniform_positive() {
    for (;;) {
      const double v = uniform();
      if (v > 0.0) return v;
    }
  }

  Index index_below(Index bound) {
    return static_cast<Index>(uniform() * static_cast<double>(bound));
  }

 private:
  std::mt19937_64 engine_;
};

// Bernoulli(q) pattern with Uniform(0,1) values, then repair of empty rows
// and columns by one uniformly placed entry each.
inline SparseMatrix random_pattern(Index n, Index m, double q, Sampler& rng) {
  std::vector<std::vector<std::pair<Index, double>>> rows(static_cast<std::size_t>(n));
  std::vector<char> col_hit(static_cast<std::size_t>(m), 0);
  for (Index i = 0; i < n; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m; ++j) {
      if (q >= 1.0 || rng.uniform() < q) {
        r.emplace_back(j, rng.uniform_positive());
        col_hit[static_cast<std::size_t>(j)] = 1;
      }
    }
  }
  for (Index i = 0; i < n; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    if (r.empty()) {
      const Index j = rng.index_below(m);
      r.emplace_back(j, rng.uniform_positive());
      col_hit[static_cast<std::size_t>(j)] = 1;
    }
  }
  for (Index j = 0; j < m; ++j) {
    if (col_hit[static_cast<std::size_t>(j)]) continue;
    const Index i = rng.index_below(n);
    auto& r = rows[static_cast<std::size_t>(i)];
    r.insert(std::lower_bound(r.begin(), r.end(), std::make_pair(j, 0.0)), {j, rng.uniform_positive()});
  }
  std::vector<Offset> offsets(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  for (Index i = 0; i < n; ++i) {
    for (const auto& [j, v] : rows[static_cast<std::size_t>(i)]) {
      cols.push_back(j);
      vals.push_back(v);
    }
    offsets[static_cast<std::size_t>(i) + 1] = static_cast<Offset>(cols.size());
  }
  return SparseMatrix(n, m, std::move(offsets), std::move(cols), std::move(vals));
}

}  // namespace detail

// Utilities nonzero with probability sparsity_u and Uniform(0,1) when
// nonzero; budgets Uniform(0,1) with exact zeros redrawn.
inline FisherInstance generate_fisher(const GeneratorConfig& cfg) {
  check_config(cfg);
  detail::Sampler rng(cfg.seed);
  SparseMatrix u = detail::random_pattern(cfg.n, cfg.m, cfg.sparsity_u, rng);
  std::vector<double> w(static_cast<std::size_t>(cfg.n));
  for (auto& wi : w) wi = rng.uniform_positive();
  return {std::move(u), std::move(w)};
}

// Utilities as in generate_fisher; endowments drawn the same way with
// sparsity_e and then rescaled column by column to sum to one.
inline ExchangeInstance generate_exchange(const GeneratorConfig& cfg) {
  check_config(cfg);
  detail::Sampler rng(cfg.seed);
  SparseMatrix u = detail::random_pattern(cfg.n, cfg.m, cfg.sparsity_u, rng);
  SparseMatrix e = detail::random_pattern(cfg.n, cfg.m, cfg.sparsity_e, rng);
  const auto sums = column_sums(e, e.values());
  std::vector<double> vals(e.values().begin(), e.values().end());
  for (Index j = 0; j < e.cols(); ++j) {
    for (Offset k : e.column_entries(j)) {
      vals[static_cast<std::size_t>(k)] /= sums[static_cast<std::size_t>(j)];
    }
  }
  return {std::move(u), e.with_values(std::move(vals))};
}

}  // namespace market_eq
