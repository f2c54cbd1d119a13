// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "dmsim/dmsim.hpp"

using namespace dmsim;

namespace {

const std::string kConfigs = DMSIM_CONFIG_DIR;

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs `body`, which fills `detail` and returns the verdict; exceptions count as FAIL.
void criterion(const char* name, const std::function<bool(std::string&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, " [%.2f s]", secs);
  report(name, ok, detail + buf);
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunConfig config(const char* file) { return load_config(kConfigs + "/" + file); }

// Random nonnegative u0 on 256 cells, 1000 steps, three seeds.
struct RandomSuite {
  std::vector<RunRecord> runs;
  double slowest = 0.0;
};

const RandomSuite& random_suite() {
  static const RandomSuite suite = [] {
    RandomSuite s;
    for (long seed : {7L, 11L, 19L}) {
      RunConfig c = config("random_1d.cfg");
      c.init_u.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      s.runs.push_back(run(c));
      s.slowest = std::max(s.slowest, seconds_since(t0));
    }
    return s;
  }();
  return suite;
}

struct SmoothLadder {
  std::vector<RunRecord> runs;
  std::vector<const RunRecord*> ptrs() const {
    std::vector<const RunRecord*> p;
    for (const auto& r : runs) p.push_back(&r);
    return p;
  }
};

const SmoothLadder& smooth_ladder() {
  static const SmoothLadder ladder = [] {
    SmoothLadder l;
    l.runs = run_all(co_refined_ladder(config("smooth_1d.cfg"), 3), 1);
    return l;
  }();
  return ladder;
}

double min_of(const std::vector<double>& xs) {
  return xs.empty() ? std::nan("") : *std::min_element(xs.begin(), xs.end());
}

std::string slopes_text(const std::vector<double>& s) {
  std::string out = "slopes";
  for (double x : s) out += " " + num(x);
  return out;
}

bool order_ok(const AuditReport& r, double least) {
  return r.verdict == AuditVerdict::order_confirmed && !r.slopes.empty() && min_of(r.slopes) >= least;
}

}  // namespace

int main() {
  criterion("mass_conservation", [](std::string& d) {
    const auto& s = random_suite();
    double worst = 0.0;
    bool complete = true;
    for (const auto& r : s.runs) {
      complete = complete && r.complete && r.steps == 1000;
      const auto& m = r.series.channel("mass");
      for (double x : m) worst = std::max(worst, std::abs(x - m[0]) / m[0]);
    }
    d = "max rel drift " + num(worst) + ", slowest run " + num(s.slowest) + " s";
    return complete && worst <= 1e-10 && s.slowest < 10.0;
  });

  criterion("max_principle", [](std::string& d) {
    double worst = -INFINITY;
    for (const auto& r : random_suite().runs) {
      const auto& mv = r.series.channel("max_v");
      for (std::size_t k = 1; k < mv.size(); ++k) worst = std::max(worst, mv[k] - mv[k - 1]);
    }
    d = "largest step increase of max v " + num(worst);
    return worst <= 1e-12;
  });

  criterion("absorption_budget", [](std::string& d) {
    double worst = -INFINITY;
    for (long seed : {7L, 11L, 19L}) {
      RunConfig c = config("random_1d.cfg");
      c.init_u.seed = seed;
      c.dt = 1e-2;
      c.t_end = 10.0;
      c.record_every = 100;
      const RunRecord r = run(c);
      if (!r.complete) throw SolverError(r.failure, 0, 0);
      const double iv0 = r.series.at("int_v", 0);
      const double absorbed = r.series.channel("absorbed").back();
      worst = std::max(worst, absorbed / iv0 - 1.0);
    }
    d = "max absorbed/int v0 - 1 = " + num(worst);
    return worst <= 1e-8;
  });

  criterion("homogeneous_exact", [](std::string& d) {
    const RunRecord r = run(config("homogeneous.cfg"));
    const double expect = std::exp(-1.0 / 1.1);
    const Snapshot& s = r.last();
    const double err = std::max(std::abs(s.v.max() - expect), std::abs(s.v.min() - expect)) / expect;
    d = "t = " + num(s.t) + ", rel error " + num(err);
    return r.complete && s.t == 1.0 && err <= 1e-5;
  });

  criterion("duality_identity", [](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    const AuditReport r = audit_identity_duality(smooth_ladder().ptrs());
    const double secs = seconds_since(t0);
    d = std::string(to_string(r.verdict)) + ", " + slopes_text(r.slopes);
    return order_ok(r, 0.8) && secs < 60.0;
  });

  criterion("entropy_identity", [](std::string& d) {
    const AuditReport r = audit_identity_entropy(smooth_ladder().ptrs());
    d = std::string(to_string(r.verdict)) + ", " + slopes_text(r.slopes);
    return order_ok(r, 0.8);
  });

  criterion("cross_diffusion_verifier", [](std::string& d) {
    bool ok = true;
    for (double alpha : {0.25, 0.5, 0.75}) {
      const MotilitySpec spec = MotilitySpec::prototype(alpha);
      const auto good = verify_cross_diffusion_bound(spec, 1.0, {1e-6, 0.0});
      const auto bad = verify_cross_diffusion_bound(spec, 1.0, {1e-6, 0.0}, 16, 1.0 / alpha + 10.0);
      const bool this_ok = std::isfinite(good.c_emp) && good.stabilized && good.level_sup.size() == 3 &&
                           !bad.stabilized;
      if (!d.empty()) d += "; ";
      d += "alpha " + num(alpha) + ": C " + num(good.c_emp) + (bad.stabilized ? ", control NOT flagged" : ", control flagged");
      ok = ok && this_ok;
    }
    return ok;
  });

  criterion("weighted_hessian_identity", [](std::string& d) {
    const AuditReport r = audit_weighted_hessian([](double x, double) { return 2.0 + std::cos(M_PI * x); },
                                                 Grid::line(1.0, 16), 4, 1.5);
    d = std::string(to_string(r.verdict)) + ", " + slopes_text(r.slopes);
    return order_ok(r, 0.8);
  });

  criterion("quasi_energy_inequality", [](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunRecord rec = run(config("gaussian_2d.cfg"));
    AuditOptions opt;
    opt.margin = 0.1;
    const AuditReport r = audit_quasi_energy(rec, opt);
    const double secs = seconds_since(t0);
    d = std::string(to_string(r.verdict)) + ", margin needed " + num(r.get("margin_needed"));
    if (!r.witness.empty()) d += ", " + r.witness;
    return rec.complete && r.verdict == AuditVerdict::pass && secs < 300.0;
  });

  criterion("uniform_bound_contrast", [](std::string& d) {
    const RunRecord rec = run(config("long_time_alpha15.cfg"));
    const AuditReport r = audit_uniform_bounds(rec);
    RunConfig sub = config("long_time_alpha15.cfg");
    sub.motility.alpha = 0.5;
    sub.t_end = 1.0;
    const AuditReport below = audit_uniform_bounds(run(sub));
    d = "alpha 1.5: " + std::string(to_string(r.verdict)) + ", entropy growth " +
        num(r.get("entropy_plateau_growth")) + "; alpha 0.5: " + to_string(below.verdict) + " (not asserted)";
    return rec.complete && r.verdict == AuditVerdict::pass;
  });

  criterion("eps_sweep", [](std::string& d) {
    const SweepPlan plan = load_plan(kConfigs + "/eps_sweep.plan");
    const ConvergenceReport rep = eps_sweep(plan);
    d = "I";
    for (double b : rep.budget) d += " " + std::to_string(b);
    d += ", L1(u) gaps";
    for (double x : rep.du) d += " " + num(x);
    const bool three = plan.values == std::vector<double>{1e-2, 1e-3, 1e-4};
    return three && rep.budget_decreasing && rep.budget_above_one && rep.differences_decreasing;
  });

  criterion("weak_form_residuals", [](std::string& d) {
    const AuditReport r = audit_weak_solution(smooth_ladder().ptrs());
    d = std::string(to_string(r.verdict)) + ", " + slopes_text(r.slopes);
    return order_ok(r, 0.8);
  });

  criterion("heat_self_convergence", [](std::string& d) {
    const OrderReport space = refinement_study(load_plan(kConfigs + "/heat_space.plan"));
    const OrderReport time = refinement_study(load_plan(kConfigs + "/heat_time.plan"));
    d = "order in h " + num(space.order_v) + ", in dt " + num(time.order_v);
    return space.ladder == "space" && time.ladder == "time" && space.order_v >= 1.9 && time.order_v >= 0.9;
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
