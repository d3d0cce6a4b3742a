#pragma once

// Benchmark suites over generated Fisher markets: per-run rows plus
// geometric means of iterations and wall time per (case, solver).

#include <charconv>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "market_eq/errors.hpp"
#include "market_eq/instance.hpp"
#include "market_eq/pdhcg.hpp"
#include "market_eq/pdhg.hpp"
#include "market_eq/report.hpp"

namespace market_eq {

struct BenchCase {
  GeneratorConfig gen;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> solvers;
};

// {"cases": [{"n": 1000, "m": 400, "q": 0.2, "seeds": [1, 2],
// "solvers": ["pdhg", "pdhcg"]}]}; "seeds" may also be a count.
inline std::vector<BenchCase> parse_suite(const Json& j) {
  std::vector<BenchCase> cases;
  for (const auto& c : j.at("cases")) {
    BenchCase bc;
    bc.gen.n = c.at("n").get<Index>();
    bc.gen.m = c.at("m").get<Index>();
    bc.gen.sparsity_u = c.value("q", 0.2);
    const auto& seeds = c.at("seeds");
    if (seeds.is_number()) {
      for (std::uint64_t s = 1; s <= seeds.get<std::uint64_t>(); ++s) bc.seeds.push_back(s);
    } else {
      bc.seeds = seeds.get<std::vector<std::uint64_t>>();
    }
    bc.solvers = c.value("solvers", std::vector<std::string>{"pdhg", "pdhcg"});
    if (bc.seeds.empty()) throw ValidationError("a suite case needs at least one seed");
    for (const auto& s : bc.solvers) {
      if (s != "pdhg" && s != "pdhcg") throw ValidationError("unknown solver '" + s + "' in suite");
    }
    check_config(bc.gen);
    cases.push_back(std::move(bc));
  }
  return cases;
}

struct BenchRow {
  GeneratorConfig gen;  // seed included
  std::string solver;
  SolveReport report;
};

struct BenchMean {
  GeneratorConfig gen;  // seed unused
  std::string solver;
  double iterations;
  double seconds;
};

inline double geometric_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::log(x);
  return std::exp(s / static_cast<double>(v.size()));
}

// on_run, when given, sees every finished row (for writing reports).
template <class OnRun>
std::vector<BenchRow> run_bench(const std::vector<BenchCase>& cases, const SolverConfig& cfg, OnRun&& on_run) {
  std::vector<BenchRow> rows;
  for (const auto& c : cases) {
    for (auto seed : c.seeds) {
      GeneratorConfig g = c.gen;
      g.seed = seed;
      const auto inst = generate_fisher(g);
      for (const auto& algo : c.solvers) {
        BenchRow row{g, algo, algo == "pdhg" ? solve_fisher_pdhg(inst, cfg) : solve_fisher_pdhcg(inst, cfg)};
        on_run(row);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

inline std::vector<BenchRow> run_bench(const std::vector<BenchCase>& cases, const SolverConfig& cfg) {
  return run_bench(cases, cfg, [](const BenchRow&) {});
}

// Means per (n, m, q, solver) in order of first appearance.
inline std::vector<BenchMean> bench_means(const std::vector<BenchRow>& rows) {
  std::vector<BenchMean> out;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> samples;
  for (const auto& r : rows) {
    std::size_t k = 0;
    while (k < out.size() && !(out[k].gen.n == r.gen.n && out[k].gen.m == r.gen.m &&
                               out[k].gen.sparsity_u == r.gen.sparsity_u && out[k].solver == r.solver)) {
      ++k;
    }
    if (k == out.size()) {
      out.push_back({r.gen, r.solver, 0.0, 0.0});
      samples.emplace_back();
    }
    samples[k].first.push_back(static_cast<double>(r.report.inner_iterations));
    samples[k].second.push_back(r.report.wall_time_seconds);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].iterations = geometric_mean(samples[k].first);
    out[k].seconds = geometric_mean(samples[k].second);
  }
  return out;
}

// Shortest text that reads back to the same double.
inline std::string exact(double v) {
  char buf[32];
  return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
}

// Per-run lines followed by one "geomean" line per (case, solver).
inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream csv;
  csv << "n,m,q,solver,seed,status,inner_iterations,restarts,wall_time_seconds,rel_kkt\n";
  for (const auto& r : rows) {
    csv << r.gen.n << ',' << r.gen.m << ',' << exact(r.gen.sparsity_u) << ',' << r.solver << ',' << r.gen.seed << ','
        << to_string(r.report.status) << ',' << r.report.inner_iterations << ',' << r.report.restarts << ','
        << exact(r.report.wall_time_seconds) << ',' << exact(r.report.final_residuals.rel_kkt) << '\n';
  }
  for (const auto& m : bench_means(rows)) {
    csv << m.gen.n << ',' << m.gen.m << ',' << exact(m.gen.sparsity_u) << ',' << m.solver << ",geomean,,"
        << exact(m.iterations) << ",," << exact(m.seconds) << ",\n";
  }
  return csv.str();
}

}  // namespace market_eq
