#pragma once

// Brute-force maximizers on dense grids with zoom refinement, and the two
// quantities checked against them: the smoothed duality gap and the buyer's
// proximal subproblem. Everything here evaluates the defining formulas
// directly on dense arrays.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace market_eq::grid {

using Dense = std::vector<std::vector<double>>;

// Maximizes a concave f on [lo, hi]: evaluate on a uniform grid, shrink the
// interval to two cells around the best point, repeat.
inline double maximize_1d(const std::function<double(double)>& f, double lo, double hi, int points = 401,
                          int rounds = 40) {
  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < rounds; ++r) {
    const double h = (hi - lo) / (points - 1);
    int arg = 0;
    for (int k = 0; k < points; ++k) {
      const double v = f(lo + h * k);
      if (v > best) {
        best = v;
        arg = k;
      }
    }
    const double c = lo + h * arg;
    lo = std::max(lo, c - 2 * h);
    hi = std::min(hi, c + 2 * h);
    if (!(hi > lo)) break;
  }
  return best;
}

inline double maximize_2d(const std::function<double(double, double)>& f, std::array<double, 2> lo,
                          std::array<double, 2> hi, int points = 121, int rounds = 40) {
  double best = -std::numeric_limits<double>::infinity();
  std::array<double, 2> arg{lo[0], lo[1]};
  for (int r = 0; r < rounds; ++r) {
    const double h0 = (hi[0] - lo[0]) / (points - 1);
    const double h1 = (hi[1] - lo[1]) / (points - 1);
    for (int a = 0; a < points; ++a) {
      for (int b = 0; b < points; ++b) {
        const double u = lo[0] + h0 * a;
        const double v = lo[1] + h1 * b;
        const double val = f(u, v);
        if (val > best) {
          best = val;
          arg = {u, v};
        }
      }
    }
    const std::array<double, 2> lo0 = lo, hi0 = hi;
    lo = {std::max(lo0[0], arg[0] - 2 * h0), std::max(lo0[1], arg[1] - 2 * h1)};
    hi = {std::min(hi0[0], arg[0] + 2 * h0), std::min(hi0[1], arg[1] + 2 * h1)};
  }
  return best;
}

// L(x, p) = -sum_i w_i log(u_i^T x_i) + sum_j p_j (sum_i x_ij - 1), dense.
inline double lagrangian(const Dense& u, const std::vector<double>& w, const Dense& x, const std::vector<double>& p) {
  double v = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) s += u[i][j] * x[i][j];
    if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
    v -= w[i] * std::log(s);
  }
  for (std::size_t j = 0; j < p.size(); ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) c += x[i][j];
    v += p[j] * (c - 1.0);
  }
  return v;
}

// max over (x^ >= 0, p^) of L(x, p^) - L(x^, p) - xi/2 ||(x^, p^) - center||^2
// for markets with at most two goods. Each p^_j and each buyer's x^_i is
// maximized separately on a grid.
inline double smoothed_gap(const Dense& u, const std::vector<double>& w, const Dense& x, const std::vector<double>& p,
                           const Dense& cx, const std::vector<double>& cp, double xi) {
  const std::size_t n = u.size();
  const std::size_t m = p.size();
  double total = 0.0;

  // p-part: L(x, p^) is affine in p^.
  double base = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += u[i][j] * x[i][j];
    base -= w[i] * std::log(s);
  }
  total += base;
  for (std::size_t j = 0; j < m; ++j) {
    double g = -1.0;
    for (std::size_t i = 0; i < n; ++i) g += x[i][j];
    const double reach = 4.0 * (1.0 + std::abs(g) / xi);
    total += maximize_1d([&](double q) { return q * g - 0.5 * xi * (q - cp[j]) * (q - cp[j]); }, cp[j] - reach,
                         cp[j] + reach);
  }

  // x-part: -L(x^, p) = sum_i [w_i log(u_i^T x^_i) - p^T x^_i] + sum_j p_j.
  for (std::size_t j = 0; j < m; ++j) total += p[j];
  for (std::size_t i = 0; i < n; ++i) {
    auto row = [&](double a, double b) {
      const double xa[2] = {a, b};
      double s = 0.0, lin = 0.0, prox = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        s += u[i][j] * xa[j];
        lin += p[j] * xa[j];
        prox += (xa[j] - cx[i][j]) * (xa[j] - cx[i][j]);
      }
      if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
      return w[i] * std::log(s) - lin - 0.5 * xi * prox;
    };
    double hi = 0.0;
    for (std::size_t j = 0; j < m; ++j) hi = std::max(hi, cx[i][j]);
    hi += 4.0 * (1.0 + (w[i] + std::abs(p[0]) + (m > 1 ? std::abs(p[1]) : 0.0)) / xi);
    if (m == 1) {
      total += maximize_1d([&](double a) { return row(a, 0.0); }, 0.0, hi);
    } else {
      total += maximize_2d(row, {0.0, 0.0}, {hi, hi});
    }
  }
  return total;
}

// Row subproblem min_{x >= 0} -w log(u^T x) + p^T x + ||x - x_prev||^2 / (2 tau)
// on the row's goods (prices already gathered per good).
struct Row {
  std::vector<double> u, x_prev, p;
  double tau, w;

  double objective(const std::vector<double>& x) const {
    double s = 0.0, lin = 0.0, prox = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      s += u[k] * x[k];
      lin += p[k] * x[k];
      prox += (x[k] - x_prev[k]) * (x[k] - x_prev[k]);
    }
    if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
    return -w * std::log(s) + lin + prox / (2.0 * tau);
  }

  // Stationarity at utility level s: x_k = max(0, x_prev_k - tau p_k + tau w u_k / s).
  std::vector<double> at_level(double s) const {
    std::vector<double> x(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) x[k] = std::max(0.0, x_prev[k] - tau * p[k] + tau * w * u[k] / s);
    return x;
  }

  double phi(double s) const {
    const auto x = at_level(s);
    double t = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) t += u[k] * x[k];
    return s - t;
  }
};

// Smallest objective over the stationarity curve s -> x(s): a log-spaced grid
// of levels up to a bound on the optimal level, then zoom refinement.
inline double row_minimum(const Row& r, int points = 20001, int rounds = 40) {
  double a = 0.0, uu = 0.0;
  for (std::size_t k = 0; k < r.u.size(); ++k) {
    a += r.u[k] * std::max(0.0, r.x_prev[k] - r.tau * r.p[k]);
    uu += r.u[k] * r.u[k];
  }
  const double s_hi = 2.0 * (a + std::sqrt(r.tau * r.w * uu)) + 1e-300;
  const double s_lo = 1e-14 * s_hi;
  auto value = [&](double log_s) { return -r.objective(r.at_level(std::exp(log_s))); };
  double lo = std::log(s_lo), hi = std::log(s_hi);
  double best = -std::numeric_limits<double>::infinity();
  double h = (hi - lo) / (points - 1);
  int arg = 0;
  for (int k = 0; k < points; ++k) {
    const double v = value(lo + h * k);
    if (v > best) {
      best = v;
      arg = k;
    }
  }
  const double c = lo + h * arg;
  best = std::max(best, maximize_1d(value, std::max(lo, c - 2 * h), std::min(hi, c + 2 * h), 201, rounds));
  return -best;
}

}  // namespace market_eq::grid
