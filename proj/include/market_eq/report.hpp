#pragma once

// Solver configuration, solutions and solve reports, with their JSON form.

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "market_eq/adaptive.hpp"
#include "market_eq/instance.hpp"
#include "market_eq/kkt.hpp"
#include "market_eq/section_search.hpp"

namespace market_eq {

using Json = nlohmann::ordered_json;

enum class Algorithm { pdhg, pdhcg };
enum class RestartMode { adaptive, fixed };
// theory: tau = sigma = 1/(2L). adaptive: eta and omega adapted at restarts.
// fixed: eta held at its initial value, omega still adapted.
enum class StepMode { theory, adaptive, fixed };
enum class Status { optimal, max_iters, diverging };

inline const char* to_string(Algorithm a) { return a == Algorithm::pdhg ? "pdhg" : "pdhcg"; }
inline const char* to_string(RestartMode r) { return r == RestartMode::adaptive ? "adaptive" : "fixed"; }
inline const char* to_string(StepMode s) {
  switch (s) {
    case StepMode::theory: return "theory";
    case StepMode::adaptive: return "adaptive";
    case StepMode::fixed: return "fixed";
  }
  return "?";
}
inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::max_iters: return "max-iters";
    case Status::diverging: return "diverging";
  }
  return "?";
}

struct SolverConfig {
  double tolerance = 1e-4;
  std::int64_t max_iterations = 100000;
  RestartMode restart = RestartMode::adaptive;
  std::int64_t restart_length = 1000;  // K for RestartMode::fixed
  StepMode step = StepMode::adaptive;
  RestartParams restart_params;
  double initial_omega = 1.0;  // primal weight at start
  double theta = 0.2;
  double omega_bound_factor = 4.0;
  int omega_check_period = 3;
  int check_every = 40;  // inner iterations between residual evaluations
  SectionSearchOptions search;
  int power_iterations = 50;
  int threads = 1;
  bool normalize = true;  // scale each buyer's utilities to max 1 first
};

// Allocation on the utility pattern plus prices; t and y are present for
// lifted (PDHG) solutions and empty for compact ones.
struct Solution {
  std::vector<double> x;
  std::vector<double> p;
  std::vector<double> t;
  std::vector<double> y;

  bool lifted() const { return !t.empty(); }
};

struct HistoryEntry {
  std::int64_t iteration;
  double rel_kkt;
  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct SolveReport {
  Algorithm solver = Algorithm::pdhcg;
  Status status = Status::max_iters;
  std::int64_t inner_iterations = 0;
  std::int64_t restarts = 0;
  std::int64_t rejected_steps = 0;  // adaptive steps retried with a smaller eta
  double wall_time_seconds = 0.0;
  Residuals final_residuals;
  std::vector<HistoryEntry> residual_history;
  Solution solution;
  std::vector<double> row_scales;               // normalization applied before solving
  std::vector<std::int64_t> subproblem_passes;  // PDHCG: k-section passes per attempted step, all rows
  double final_eta = 0.0;
  double final_omega = 0.0;
  std::string instance_fingerprint;
  SolverConfig config;

  std::span<const double> prices() const { return solution.p; }
};

// FNV-1a over the instance arrays.
class Fingerprint {
 public:
  template <class T>
  void add(std::span<const T> data) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
    for (std::size_t k = 0; k < data.size_bytes(); ++k) {
      hash_ ^= bytes[k];
      hash_ *= 0x100000001b3ULL;
    }
  }
  template <class T>
  void add_value(T v) { add(std::span<const T>(&v, 1)); }

  std::string hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int k = 0; k < 16; ++k) s[static_cast<std::size_t>(15 - k)] = kDigits[(hash_ >> (4 * k)) & 0xF];
    return s;
  }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

inline void add_matrix(Fingerprint& f, const SparseMatrix& M) {
  f.add_value(M.rows());
  f.add_value(M.cols());
  f.add(M.row_offsets());
  f.add(M.col_indices());
  f.add(M.values());
}

inline std::string fingerprint(const FisherInstance& inst) {
  Fingerprint f;
  add_matrix(f, inst.utilities);
  f.add(std::span<const double>(inst.budgets));
  return f.hex();
}

inline std::string fingerprint(const ExchangeInstance& inst) {
  Fingerprint f;
  add_matrix(f, inst.utilities);
  add_matrix(f, inst.endowments);
  return f.hex();
}

inline Json to_json(const Residuals& r) {
  return Json{{"r_primal", r.r_primal}, {"r_dual", r.r_dual}, {"r_gap", r.r_gap}, {"rel_kkt", r.rel_kkt}};
}

inline Residuals residuals_from_json(const Json& j) {
  return {j.at("r_primal").get<double>(), j.at("r_dual").get<double>(), j.at("r_gap").get<double>(),
          j.at("rel_kkt").get<double>()};
}

inline Json to_json(const SolverConfig& c) {
  return Json{{"tolerance", c.tolerance},
              {"max_iterations", c.max_iterations},
              {"restart", to_string(c.restart)},
              {"restart_length", c.restart_length},
              {"step", to_string(c.step)},
              {"beta_sufficient", c.restart_params.beta_sufficient},
              {"beta_necessary", c.restart_params.beta_necessary},
              {"beta_artificial", c.restart_params.beta_artificial},
              {"initial_omega", c.initial_omega},
              {"theta", c.theta},
              {"omega_bound_factor", c.omega_bound_factor},
              {"omega_check_period", c.omega_check_period},
              {"check_every", c.check_every},
              {"sections", c.search.sections},
              {"subproblem_tol", c.search.tol},
              {"exact_finish", c.search.exact_finish},
              {"power_iterations", c.power_iterations},
              {"threads", c.threads},
              {"normalize", c.normalize}};
}

inline Json to_json(const Solution& s) {
  Json j{{"x", s.x}, {"p", s.p}};
  if (s.lifted()) {
    j["t"] = s.t;
    j["y"] = s.y;
  }
  return j;
}

inline Solution solution_from_json(const Json& j) {
  Solution s;
  s.x = j.at("x").get<std::vector<double>>();
  s.p = j.at("p").get<std::vector<double>>();
  if (j.contains("t")) s.t = j.at("t").get<std::vector<double>>();
  if (j.contains("y")) s.y = j.at("y").get<std::vector<double>>();
  return s;
}

inline Json history_to_json(const std::vector<HistoryEntry>& h) {
  Json arr = Json::array();
  for (const auto& e : h) arr.push_back(Json::array({e.iteration, e.rel_kkt}));
  return arr;
}

inline Json to_json(const SolveReport& r) {
  Json j;
  j["solver"] = to_string(r.solver);
  j["status"] = to_string(r.status);
  j["inner_iterations"] = r.inner_iterations;
  j["restarts"] = r.restarts;
  j["rejected_steps"] = r.rejected_steps;
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["final_residuals"] = to_json(r.final_residuals);
  j["residual_history"] = history_to_json(r.residual_history);
  j["prices"] = r.solution.p;
  j["solution"] = to_json(r.solution);
  j["row_scales"] = r.row_scales;
  if (!r.subproblem_passes.empty()) j["subproblem_passes"] = r.subproblem_passes;
  j["final_eta"] = r.final_eta;
  j["final_omega"] = r.final_omega;
  j["instance_fingerprint"] = r.instance_fingerprint;
  j["config"] = to_json(r.config);
  return j;
}

}  // namespace market_eq
