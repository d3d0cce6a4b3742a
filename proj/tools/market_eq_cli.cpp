// market-eq: generate, solve and check market equilibrium instances.
//
// Exit codes: 0 success / optimal, 1 usage error, 2 max-iters, diverging or a
// numerical fault, 3 I/O or validation error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "market_eq/market_eq.hpp"

namespace me = market_eq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSolver = 2;
constexpr int kExitData = 3;

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverFlags {
  std::string algo = "pdhcg";
  double tol = 1e-4;
  long long max_iters = 100000;
  std::string restart = "adaptive";
  int sections = 32;
  std::string step = "adaptive";
  int threads = 1;
};

void add_solver_flags(CLI::App* app, SolverFlags& f, bool with_algo) {
  if (with_algo) app->add_option("--algo", f.algo, "pdhg or pdhcg")->check(CLI::IsMember({"pdhg", "pdhcg"}));
  app->add_option("--tol", f.tol, "relative KKT tolerance")->capture_default_str();
  app->add_option("--max-iters", f.max_iters, "inner iteration cap")->capture_default_str();
  app->add_option("--restart", f.restart, "adaptive or fixed:K")->capture_default_str();
  app->add_option("--sections", f.sections, "k of the k-section row search")->capture_default_str();
  app->add_option("--step", f.step, "theory, adaptive or fixed")
      ->check(CLI::IsMember({"theory", "adaptive", "fixed"}))
      ->capture_default_str();
  app->add_option("--threads", f.threads, "worker threads")->capture_default_str();
}

me::SolverConfig to_config(const SolverFlags& f) {
  me::SolverConfig cfg;
  cfg.tolerance = f.tol;
  cfg.max_iterations = f.max_iters;
  if (f.restart == "adaptive") {
    cfg.restart = me::RestartMode::adaptive;
  } else if (f.restart.rfind("fixed:", 0) == 0) {
    cfg.restart = me::RestartMode::fixed;
    try {
      cfg.restart_length = std::stoll(f.restart.substr(6));
    } catch (const std::exception&) {
      throw UsageError("--restart fixed:K needs an integer K");
    }
  } else {
    throw UsageError("--restart must be 'adaptive' or 'fixed:K'");
  }
  cfg.search.sections = f.sections;
  cfg.step = f.step == "theory" ? me::StepMode::theory : f.step == "fixed" ? me::StepMode::fixed : me::StepMode::adaptive;
  cfg.threads = f.threads;
  try {
    me::check_config(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (cfg.search.sections < 2) throw UsageError("--sections must be at least 2");
  return cfg;
}

me::SolveReport solve(const me::FisherInstance& inst, const std::string& algo, const me::SolverConfig& cfg) {
  return algo == "pdhg" ? me::solve_fisher_pdhg(inst, cfg) : me::solve_fisher_pdhcg(inst, cfg);
}

void write_json(const me::Json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

me::Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return me::Json::parse(in);
  } catch (const me::Json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Market equilibrium solvers (PDHG, PDHCG, exchange fixed point)"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic instance");
  std::string gen_kind = "fisher", gen_out, gen_format = "mtx";
  me::GeneratorConfig gcfg;
  std::uint64_t seed = 1;
  gen->add_option("--kind", gen_kind, "fisher or exchange")->check(CLI::IsMember({"fisher", "exchange"}));
  gen->add_option("--n", gcfg.n, "buyers")->capture_default_str();
  gen->add_option("--m", gcfg.m, "goods")->capture_default_str();
  gen->add_option("--q", gcfg.sparsity_u, "utility density")->capture_default_str();
  gen->add_option("--qe", gcfg.sparsity_e, "endowment density")->capture_default_str();
  gen->add_option("--seed", seed, "generator seed")->capture_default_str();
  gen->add_option("--format", gen_format, "mtx or csv")->check(CLI::IsMember({"mtx", "csv"}));
  gen->add_option("--out", gen_out, "output path prefix")->required();

  // solve
  auto* sol = app.add_subcommand("solve", "solve a Fisher market");
  SolverFlags sflags;
  std::string in_prefix, in_format = "mtx", out_path;
  add_solver_flags(sol, sflags, true);
  sol->add_option("--in", in_prefix, "instance path prefix")->required();
  sol->add_option("--format", in_format, "mtx or csv")->check(CLI::IsMember({"mtx", "csv"}));
  sol->add_option("--out", out_path, "report JSON path (default stdout)");

  // check
  auto* chk = app.add_subcommand("check", "residuals of a solution");
  std::string solution_path;
  chk->add_option("--in", in_prefix, "instance path prefix")->required();
  chk->add_option("--format", in_format, "mtx or csv")->check(CLI::IsMember({"mtx", "csv"}));
  chk->add_option("--solution", solution_path, "report or solution JSON")->required();
  chk->add_option("--out", out_path, "residuals JSON path (default stdout)");

  // bench
  auto* bench = app.add_subcommand("bench", "benchmark table over generated instances");
  std::string suite_path, reports_dir;
  SolverFlags bflags;
  add_solver_flags(bench, bflags, false);
  bench->add_option("--suite", suite_path, "suite JSON file")->required();
  bench->add_option("--out", out_path, "CSV path (default stdout)");
  bench->add_option("--reports", reports_dir, "directory for per-run JSON reports");

  // exchange
  auto* ex = app.add_subcommand("exchange", "Arrow-Debreu fixed-point iteration");
  SolverFlags xflags;
  me::ExchangeConfig xcfg;
  add_solver_flags(ex, xflags, false);
  ex->add_option("--in", in_prefix, "exchange instance path prefix")->required();
  ex->add_option("--format", in_format, "mtx or csv")->check(CLI::IsMember({"mtx", "csv"}));
  ex->add_option("--outer-tol", xcfg.outer_tol, "tolerance on the budget gap")->capture_default_str();
  ex->add_option("--max-outer", xcfg.max_outer, "outer iteration cap")->capture_default_str();
  ex->add_option("--out", out_path, "trace JSON path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      gcfg.seed = seed;
      const auto fmt = me::io::parse_format(gen_format);
      if (gen_kind == "fisher") {
        me::io::save_fisher(me::generate_fisher(gcfg), gen_out, fmt);
      } else {
        me::io::save_exchange(me::generate_exchange(gcfg), gen_out, fmt);
      }
      return kExitOk;
    }
    if (sol->parsed()) {
      const me::SolverConfig cfg = to_config(sflags);
      const auto inst = me::io::load_fisher(in_prefix, me::io::parse_format(in_format));
      me::require_valid(inst);
      const me::SolveReport report = solve(inst, sflags.algo, cfg);
      write_json(me::to_json(report), out_path);
      std::cerr << sflags.algo << ": " << me::to_string(report.status) << " after " << report.inner_iterations
                << " iterations, rel_kkt " << report.final_residuals.rel_kkt << '\n';
      return report.status == me::Status::optimal ? kExitOk : kExitSolver;
    }
    if (chk->parsed()) {
      const auto inst = me::io::load_fisher(in_prefix, me::io::parse_format(in_format));
      me::require_valid(inst);
      const me::Json j = read_json(solution_path);
      const me::Solution s = me::solution_from_json(j.contains("solution") ? j.at("solution") : j);
      const me::Residuals r = s.lifted() ? me::residuals_lifted(inst, s.x, s.t, s.p, s.y)
                                         : me::residuals_compact(inst, s.x, s.p);
      write_json(me::to_json(r), out_path);
      return kExitOk;
    }
    if (bench->parsed()) {
      const me::SolverConfig cfg = to_config(bflags);
      const auto cases = me::parse_suite(read_json(suite_path));
      const auto rows = me::run_bench(cases, cfg, [&](const me::BenchRow& r) {
        if (reports_dir.empty()) return;
        std::filesystem::create_directories(reports_dir);
        write_json(me::to_json(r.report), reports_dir + "/" + r.solver + "_n" + std::to_string(r.gen.n) + "_m" +
                                              std::to_string(r.gen.m) + "_seed" + std::to_string(r.gen.seed) + ".json");
      });
      const std::string table = me::bench_csv(rows);
      if (out_path.empty() || out_path == "-") {
        std::cout << table;
      } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << table;
      }
      return kExitOk;
    }
    if (ex->parsed()) {
      xcfg.inner = to_config(xflags);
      if (!(xcfg.outer_tol > 0.0) || xcfg.max_outer < 1) throw UsageError("--outer-tol and --max-outer must be positive");
      const auto inst = me::io::load_exchange(in_prefix, me::io::parse_format(in_format));
      const me::FixedPointTrace trace = me::solve_exchange(inst, xcfg);
      write_json(me::to_json(trace), out_path);
      std::cerr << "exchange: " << me::to_string(trace.status) << " after " << trace.outer_iterations
                << " outer iterations\n";
      return trace.status == me::Status::optimal ? kExitOk : kExitSolver;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const me::NumericalFault& e) {
    std::cerr << "numerical fault: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
