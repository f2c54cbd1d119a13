#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dmsim/audit.hpp"
#include "dmsim/config.hpp"
#include "dmsim/run.hpp"

namespace dmsim {

/// A base config plus one varied axis.
struct SweepPlan {
  enum class Axis { eps, alpha, ladder };
  enum class Ladder { space, time, both };

  RunConfig base;
  Axis axis = Axis::eps;
  std::vector<double> values;  ///< eps or alpha values
  Ladder ladder = Ladder::both;
  int levels = 3;

  void validate() const {
    base.validate();
    if (axis == Axis::eps) {
      if (values.empty()) throw ConfigError("eps sweep needs plan.values");
      for (std::size_t k = 1; k < values.size(); ++k)
        if (!(values[k] < values[k - 1])) throw ConfigError("eps values must be strictly decreasing");
    }
    if (axis == Axis::alpha && values.empty()) throw ConfigError("alpha scan needs plan.values");
    if (axis == Axis::ladder && levels < 3) throw ConfigError("refinement study needs at least 3 levels");
  }
};

inline std::vector<double> parse_value_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

/// Plan file: a run config plus plan.axis (eps|alpha|ladder), plan.values
/// (comma list), plan.ladder (space|time|both), plan.levels.
inline SweepPlan plan_from_keys(const KeyValues& kv) {
  SweepPlan p;
  p.base = config_from_keys(kv, "plan.");
  for (const auto& [k, v] : kv)
    if (k.rfind("plan.", 0) == 0 && k != "plan.axis" && k != "plan.values" && k != "plan.ladder" && k != "plan.levels")
      throw ConfigError("unknown plan key '" + k + "'");
  if (auto it = kv.find("plan.axis"); it != kv.end()) {
    if (it->second == "eps") p.axis = SweepPlan::Axis::eps;
    else if (it->second == "alpha") p.axis = SweepPlan::Axis::alpha;
    else if (it->second == "ladder") p.axis = SweepPlan::Axis::ladder;
    else throw ConfigError("plan.axis must be eps, alpha or ladder");
  }
  if (auto it = kv.find("plan.values"); it != kv.end()) p.values = parse_value_list("plan.values", it->second);
  if (auto it = kv.find("plan.ladder"); it != kv.end()) {
    if (it->second == "space") p.ladder = SweepPlan::Ladder::space;
    else if (it->second == "time") p.ladder = SweepPlan::Ladder::time;
    else if (it->second == "both") p.ladder = SweepPlan::Ladder::both;
    else throw ConfigError("plan.ladder must be space, time or both");
  }
  if (auto it = kv.find("plan.levels"); it != kv.end()) p.levels = static_cast<int>(parse_long("plan.levels", it->second));
  return p;
}

inline SweepPlan load_plan(const std::filesystem::path& path) { return plan_from_keys(read_key_values(path)); }

/// Runs every config, one run per worker, results in input order.
inline std::vector<RunRecord> run_all(const std::vector<RunConfig>& configs, int threads) {
  std::vector<RunRecord> out(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < configs.size(); k = next++) {
      try {
        out[k] = run(configs[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(configs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// L1(Omega x (0,T)) distance, trapezoid over the common snapshot times.
inline double space_time_l1(const std::vector<Snapshot>& a, const std::vector<Snapshot>& b, bool use_u) {
  if (a.size() != b.size()) throw ContractError("space-time distance: snapshot counts differ");
  double acc = 0.0, prev = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].t != b[k].t) throw ContractError("space-time distance: snapshot times differ");
    const double d = use_u ? l1_distance(a[k].u, b[k].u) : l1_distance(a[k].v, b[k].v);
    if (k > 0) acc += 0.5 * (d + prev) * (a[k].t - a[k - 1].t);
    prev = d;
  }
  return acc;
}

struct ConvergenceReport {
  std::vector<double> eps;
  std::vector<double> budget;   ///< I_eps(T)
  std::vector<double> du, dv;   ///< distance between consecutive eps values
  bool budget_decreasing = false;
  bool budget_above_one = false;
  bool differences_decreasing = false;
  AuditReport flux;
  std::vector<RunRecord> runs;

  bool passed() const { return budget_decreasing && budget_above_one && differences_decreasing; }
};

inline ConvergenceReport eps_sweep(const SweepPlan& plan) {
  plan.validate();
  if (plan.base.dt_policy != "fixed") throw ConfigError("eps sweep needs a fixed step so snapshot times align");
  std::vector<RunConfig> cfgs;
  for (double e : plan.values) {
    RunConfig c = plan.base;
    c.eps = e;
    c.keep_snapshots = true;
    cfgs.push_back(c);
  }
  ConvergenceReport rep;
  rep.eps = plan.values;
  rep.runs = run_all(cfgs, plan.base.threads);
  for (const auto& r : rep.runs) {
    if (!r.complete) throw SolverError("eps sweep: run at eps = " + fmt17(r.config.eps) + " failed: " + r.failure, 0, 0);
    rep.budget.push_back(r.series.channel("budget_I").back());
  }
  for (std::size_t k = 1; k < rep.runs.size(); ++k) {
    rep.du.push_back(space_time_l1(rep.runs[k - 1].snapshots, rep.runs[k].snapshots, true));
    rep.dv.push_back(space_time_l1(rep.runs[k - 1].snapshots, rep.runs[k].snapshots, false));
  }
  rep.budget_decreasing = true;
  for (std::size_t k = 1; k < rep.budget.size(); ++k)
    if (!(rep.budget[k] < rep.budget[k - 1])) rep.budget_decreasing = false;
  rep.budget_above_one = true;
  for (double b : rep.budget)
    if (!(b >= 1.0)) rep.budget_above_one = false;
  rep.differences_decreasing = true;
  for (std::size_t k = 1; k < rep.du.size(); ++k)
    if (!(rep.du[k] < rep.du[k - 1])) rep.differences_decreasing = false;
  std::vector<const RunRecord*> ptrs;
  for (const auto& r : rep.runs) ptrs.push_back(&r);
  rep.flux = audit_flux_integrability(ptrs);
  return rep;
}

struct OrderReport {
  std::string ladder;
  std::vector<double> h, dt;
  std::vector<double> err_u, err_v;  ///< L1 distance to the next finer level at the final time
  std::vector<double> slopes_u, slopes_v;
  double order_u = std::numeric_limits<double>::quiet_NaN();  ///< least-squares self-convergence order
  double order_v = std::numeric_limits<double>::quiet_NaN();
  std::vector<RunRecord> runs;
};

/// Self-convergence orders from consecutive levels: err[k] is the L1 distance
/// between the final states of levels k and k+1, the finer one block-averaged
/// onto the coarser grid. For errors C h^p the ratios are exactly 2^p.
inline OrderReport refinement_study(const SweepPlan& plan) {
  if (plan.levels < 3) throw ConfigError("refinement study needs at least 3 levels");
  plan.validate();
  std::vector<RunConfig> cfgs;
  const bool space = plan.ladder != SweepPlan::Ladder::time;
  const bool time = plan.ladder != SweepPlan::Ladder::space;
  for (int k = 0; k < plan.levels; ++k) {
    RunConfig c = plan.base;
    const int f = 1 << k;
    if (space) {
      c.grid.nx *= f;
      if (c.grid.dim == 2) c.grid.ny *= f;
    }
    if (time) {
      c.dt /= f;
      c.dt_cap /= f;
    }
    c.keep_snapshots = false;
    cfgs.push_back(c);
  }
  OrderReport rep;
  rep.ladder = space && time ? "both" : (space ? "space" : "time");
  rep.runs = run_all(cfgs, plan.base.threads);
  for (const auto& r : rep.runs)
    if (!r.complete) throw SolverError("refinement study: a level failed: " + r.failure, 0, 0);
  const int factor = space ? 2 : 1;
  for (int k = 0; k + 1 < plan.levels; ++k) {
    const RunRecord& r = rep.runs[k];
    const RunRecord& ref = rep.runs[k + 1];
    rep.h.push_back(r.grid().min_spacing());
    rep.dt.push_back(r.config.dt_policy == "fixed" ? r.config.dt : r.config.dt_cap);
    rep.err_u.push_back(l1_distance(r.last().u, restrict_to(ref.last().u, factor)));
    rep.err_v.push_back(l1_distance(r.last().v, restrict_to(ref.last().v, factor)));
  }
  auto slopes = [&](const std::vector<double>& e, std::vector<double>& out) {
    std::vector<double> x, y;
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (k > 0) out.push_back(std::log2(e[k - 1] / e[k]));
      x.push_back(std::log(space ? rep.h[k] : rep.dt[k]));
      y.push_back(std::log(e[k]));
    }
    return detail::least_squares_slope(x, y);
  };
  rep.order_u = slopes(rep.err_u, rep.slopes_u);
  rep.order_v = slopes(rep.err_v, rep.slopes_v);
  return rep;
}

struct AlphaRow {
  double alpha = 0.0;
  double flux_exponent = 0.0;
  AuditReport plateau;
};

struct ComparisonReport {
  std::vector<AlphaRow> rows;
  std::vector<RunRecord> runs;
};

inline std::vector<double> default_alpha_values() { return {0.25, 0.5, 0.75, 1.0, 1.5, 2.0}; }

/// Identical data at each alpha; tabulates plateau evidence and the flux exponent in use.
inline ComparisonReport alpha_scan(const SweepPlan& plan) {
  const std::vector<double> alphas = plan.values.empty() ? default_alpha_values() : plan.values;
  std::vector<RunConfig> cfgs;
  for (double a : alphas) {
    RunConfig c = plan.base;
    c.motility.alpha = a;
    c.keep_snapshots = false;
    c.validate();
    cfgs.push_back(c);
  }
  ComparisonReport rep;
  rep.runs = run_all(cfgs, plan.base.threads);
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    AlphaRow row;
    row.alpha = alphas[k];
    row.flux_exponent = flux_exponent(alphas[k]);
    row.plateau = audit_uniform_bounds(rep.runs[k]);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace dmsim
