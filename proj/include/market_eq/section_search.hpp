#pragma once

// Exact solver for one buyer's proximal subproblem
//
//   min_{x >= 0}  -w log(u^T x) + p^T x + ||x - x_prev||^2 / (2 tau)
//
// over the buyer's stored goods. For a trial utility level s > 0 the KKT
// system gives x_j(s) = max(0, x_prev_j - tau p_j + tau w u_j / s); the
// gradient of the log term carries the factor u_j. The optimum is
// the unique root of phi(s) = s - u^T x(s), which is increasing in s. Any
// trial s together with s~ = u^T x(s) brackets the root, so a k-section
// search evaluates k-1 interior trials per pass and keeps the tightest
// bracket implied by all of them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "market_eq/errors.hpp"
#include "market_eq/sparse.hpp"

namespace market_eq {

struct Bracket {
  double lower;
  double upper;
  double width() const { return upper - lower; }
};

struct SectionSearchOptions {
  int sections = 32;       // k; k-1 interior trials per pass, k = 2 is bisection
  double tol = 1e-10;      // stop once the bracket is this narrow
  int max_passes = 200;    // exceeding this means phi was not monotone: a bug
  // Once no KKT breakpoint lies inside the bracket, the active set is known
  // and the root of the remaining quadratic is taken in closed form.
  bool exact_finish = true;
};

struct RowSolveResult {
  double s = 0.0;   // utility level u^T x of the returned row
  int passes = 0;   // k-section passes performed
  Bracket bracket{0.0, 0.0};
};

struct RowCandidate {
  std::vector<double> x;
  double s_tilde = 0.0;
};

// x_j(s) = max(0, x_prev_j - tau p_j + tau w u_j / s) over the row's goods, and
// s~ = u^T x(s).
inline RowCandidate row_candidate(std::span<const double> x_prev_row, std::span<const double> prices,
                                  double tau, double budget, const RowView& u_row, double s) {
  RowCandidate out;
  out.x.resize(u_row.size());
  const double push = tau * budget / s;
  for (std::size_t k = 0; k < u_row.size(); ++k) {
    const double v =
        x_prev_row[k] - tau * prices[static_cast<std::size_t>(u_row.cols[k])] + push * u_row.values[k];
    out.x[k] = v > 0.0 ? v : 0.0;
    out.s_tilde += u_row.values[k] * out.x[k];
  }
  return out;
}

// Objective of the row subproblem; +inf when u^T x <= 0.
inline double row_objective(std::span<const double> x_row, std::span<const double> x_prev_row,
                            std::span<const double> prices, double tau, double budget,
                            const RowView& u_row) {
  double s = 0.0;
  double lin = 0.0;
  double prox = 0.0;
  for (std::size_t k = 0; k < u_row.size(); ++k) {
    s += u_row.values[k] * x_row[k];
    lin += prices[static_cast<std::size_t>(u_row.cols[k])] * x_row[k];
    const double d = x_row[k] - x_prev_row[k];
    prox += d * d;
  }
  if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
  return -budget * std::log(s) + lin + prox / (2.0 * tau);
}

struct NoBracketObserver {
  void operator()(const Bracket&) const {}
};

namespace detail {

// Per-row view with shifts a_j = x_prev_j - tau p_j precomputed.
struct ShiftedRow {
  std::span<const double> shift;
  std::span<const double> util;
  double push_numerator;  // tau * w

  double s_tilde(double s) const {
    const double c = push_numerator / s;
    double acc = 0.0;
    for (std::size_t k = 0; k < shift.size(); ++k) {
      const double v = shift[k] + c * util[k];
      acc += v > 0.0 ? util[k] * v : 0.0;
    }
    return acc;
  }

  // s~ at all trials in one sweep over the row.
  void s_tilde_many(std::span<const double> trials, std::span<double> out,
                    std::vector<double>& pushes) const {
    const std::size_t t = trials.size();
    pushes.resize(t);
    for (std::size_t l = 0; l < t; ++l) {
      pushes[l] = push_numerator / trials[l];
      out[l] = 0.0;
    }
    for (std::size_t k = 0; k < shift.size(); ++k) {
      const double a = shift[k];
      const double u = util[k];
      for (std::size_t l = 0; l < t; ++l) {
        const double v = a + pushes[l] * u;
        out[l] += v > 0.0 ? u * v : 0.0;
      }
    }
  }

  // Closed-form root when the active set {k : a_k + u_k c/s > 0} is the same at
  // both ends of the bracket. Returns NaN when it is not.
  double root_if_active_set_fixed(const Bracket& b) const {
    const double c_lo = push_numerator / b.lower;
    const double c_hi = push_numerator / b.upper;
    double sum_ua = 0.0;
    double sum_uu = 0.0;
    for (std::size_t k = 0; k < shift.size(); ++k) {
      const bool on_hi = shift[k] + c_hi * util[k] > 0.0;
      const bool on_lo = shift[k] + c_lo * util[k] > 0.0;
      if (on_hi != on_lo) return std::numeric_limits<double>::quiet_NaN();
      if (on_hi) {
        sum_ua += util[k] * shift[k];
        sum_uu += util[k] * util[k];
      }
    }
    if (sum_uu == 0.0) return std::numeric_limits<double>::quiet_NaN();
    // s^2 - sum_ua s - tau w sum_uu = 0, positive root.
    const double disc = sum_ua * sum_ua + 4.0 * push_numerator * sum_uu;
    const double sq = std::sqrt(disc);
    // Avoid cancellation when sum_ua < 0.
    const double s = sum_ua >= 0.0 ? 0.5 * (sum_ua + sq) : (2.0 * push_numerator * sum_uu) / (sq - sum_ua);
    return s;
  }
};

inline std::vector<double>& thread_scratch(int slot) {
  thread_local std::vector<double> buffers[4];
  return buffers[slot];
}

}  // namespace detail

// Solves the row subproblem and writes the minimizer into x_row (aligned with
// u_row). x_prev_row is x_i^k on the same goods; prices is the full p.
template <class Observer = NoBracketObserver>
RowSolveResult solve_row_subproblem(std::span<const double> x_prev_row, std::span<const double> prices,
                                    double tau, double budget, const RowView& u_row,
                                    const SectionSearchOptions& opt, std::span<double> x_row,
                                    Observer&& observe = {}) {
  if (opt.sections < 2) throw std::invalid_argument("k-section search needs k >= 2");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("k-section tolerance must be positive");
  if (u_row.empty()) throw ValidationError("row subproblem: buyer values no good");

  const std::size_t len = u_row.size();
  auto& shift = detail::thread_scratch(0);
  auto& trials = detail::thread_scratch(1);
  auto& tildes = detail::thread_scratch(2);
  auto& pushes = detail::thread_scratch(3);
  shift.resize(len);
  double s0 = 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    shift[k] = x_prev_row[k] - tau * prices[static_cast<std::size_t>(u_row.cols[k])];
    s0 += u_row.values[k] * x_prev_row[k];
  }
  const detail::ShiftedRow row{std::span<const double>(shift.data(), len), u_row.values, tau * budget};

  RowSolveResult result;
  auto emit = [&](double s) {
    const double c = row.push_numerator / s;
    for (std::size_t k = 0; k < len; ++k) {
      const double v = shift[k] + c * u_row.values[k];
      x_row[k] = v > 0.0 ? v : 0.0;
    }
    result.s = s;
    return result;
  };

  // Initial trial from the previous iterate; an all-zero row has no usable
  // level, so start from a tiny positive one instead (phi -> -inf as s -> 0+).
  double s = s0 > 0.0 ? s0 : 1e-12 * (1.0 + tau * budget);
  double st = row.s_tilde(s);
  if (st == s) {
    result.bracket = {s, s};
    return emit(s);
  }
  Bracket b{std::min(s, st), std::max(s, st)};
  result.bracket = b;

  const auto k = static_cast<std::size_t>(opt.sections);
  trials.resize(k - 1);
  tildes.resize(k - 1);
  auto done = [&](const Bracket& br) {
    return br.width() <= std::max(opt.tol, 4.0 * std::numeric_limits<double>::epsilon() * br.upper);
  };

  while (!done(b)) {
    if (opt.exact_finish && b.lower > 0.0) {
      const double r = row.root_if_active_set_fixed(b);
      if (std::isfinite(r)) {
        result.bracket = b;
        return emit(std::clamp(r, b.lower, b.upper));
      }
    }
    if (result.passes >= opt.max_passes) {
      throw NumericalFault("k-section search did not converge; phi is not monotone");
    }
    ++result.passes;
    for (std::size_t l = 1; l < k; ++l) {
      const double frac = static_cast<double>(l) / static_cast<double>(k);
      trials[l - 1] = (1.0 - frac) * b.lower + frac * b.upper;
    }
    row.s_tilde_many(std::span<const double>(trials.data(), k - 1),
                     std::span<double>(tildes.data(), k - 1), pushes);
    Bracket next = b;
    for (std::size_t l = 0; l + 1 < k; ++l) {
      const double sl = trials[l];
      const double tl = tildes[l];
      if (tl == sl && sl > 0.0) {
        result.bracket = {sl, sl};
        observe(result.bracket);
        return emit(sl);
      }
      next.upper = std::min(next.upper, std::max(sl, tl));
      next.lower = std::max(next.lower, std::min(sl, tl));
    }
    if (next.lower > next.upper) {
      // Rounding pushed the folds past each other; the root sits between them.
      const double mid = 0.5 * (next.lower + next.upper);
      next = {mid, mid};
    }
    b = next;
    result.bracket = b;
    observe(b);
  }
  if (opt.exact_finish && b.lower > 0.0) {
    const double r = row.root_if_active_set_fixed(b);
    if (std::isfinite(r)) return emit(std::clamp(r, b.lower, b.upper));
  }
  return emit(0.5 * (b.lower + b.upper));
}

}  // namespace market_eq
