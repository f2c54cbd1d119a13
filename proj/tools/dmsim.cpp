// Command-line front end: simulate, audit, check-motility, sweep, refine, alpha-scan.
//
// Exit codes: 0 success, 1 usage or config error, 2 numerical failure,
// 3 checks ran but at least one failed.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dmsim/dmsim.hpp"

namespace fs = std::filesystem;
using namespace dmsim;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 1;
constexpr int kNumerical = 2;
constexpr int kCheckFailed = 3;

int cmd_simulate(const std::string& config_path, const std::string& out_override, int threads) {
  RunConfig cfg = load_config(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (threads > 0) cfg.threads = threads;
  const InitialData init = make_initial_data(cfg);
  RunRecord rec = run(cfg, init);
  write_run_dir(cfg.output_dir, rec);
  std::cout << "run written to " << cfg.output_dir << " (" << rec.steps << " steps, "
            << rec.series.size() << " records)\n";
  if (!rec.complete) {
    std::cerr << "run incomplete: " << rec.failure << "\n";
    return kNumerical;
  }
  return kOk;
}

int cmd_audit(const std::string& dir, int levels, bool rerun, double margin) {
  const RunRecord rec = load_run_dir(dir);
  AuditOptions opt;
  opt.margin = margin >= 0.0 ? margin : rec.config.audit_margin;
  std::vector<RunRecord> extra;
  std::vector<const RunRecord*> ladder{&rec};
  if (rerun && levels > 1) {
    auto cfgs = co_refined_ladder(rec.config, levels);
    cfgs.erase(cfgs.begin());
    extra = run_all(cfgs, rec.config.threads);
    for (const auto& r : extra) {
      if (!r.complete) {
        std::cerr << "refinement rerun failed: " << r.failure << "\n";
        return kNumerical;
      }
      ladder.push_back(&r);
    }
  }
  const auto reports = audit_run(rec, ladder, opt);
  write_audits(dir, reports);
  bool failed = false;
  for (const auto& r : reports) {
    std::cout << r.name << ": " << to_string(r.verdict);
    if (!r.witness.empty()) std::cout << " (" << r.witness << ")";
    std::cout << "\n";
    failed = failed || is_failure(r.verdict);
  }
  return failed ? kCheckFailed : kOk;
}

int cmd_check_motility(const std::string& config_path) {
  const RunConfig cfg = load_config(config_path);
  const MotilitySpec spec = cfg.motility.make();
  const HypothesisReport rep = validate_hypotheses(spec);
  std::cout << "motility " << spec.name << ", alpha = " << fmt17(spec.alpha) << ", xi0 = " << fmt17(spec.xi0) << "\n";
  for (const auto& c : rep.checks) {
    std::cout << "  " << c.name << ": " << to_string(c.verdict);
    if (c.verdict == Verdict::fail)
      std::cout << " (witness xi = " << fmt17(c.witness_xi) << ", value " << fmt17(c.witness_value) << ")";
    if (!c.note.empty()) std::cout << " [" << c.note << "]";
    std::cout << "\n";
  }
  bool failed = rep.any_fail();
  if (spec.alpha > 0.0 && spec.alpha < 1.0) {
    const double xi_star = make_initial_data(cfg).v0.max();
    const InequalityReport ineq = verify_cross_diffusion_bound(spec, xi_star, {cfg.eps, 0.0});
    std::cout << "  cross-diffusion bound: a = " << fmt17(ineq.a) << ", C = " << fmt17(ineq.c_emp)
              << (ineq.stabilized ? " (stable under refinement)" : " (NOT stable under refinement)") << ", xi1 = "
              << fmt17(ineq.xi1) << ", eps* = " << fmt17(ineq.eps_star) << "\n";
    failed = failed || !ineq.stabilized;
  } else {
    std::cout << "  cross-diffusion bound: skipped (applies to alpha in (0,1))\n";
  }
  return failed ? kCheckFailed : kOk;
}

void persist_runs(const fs::path& root, const std::vector<RunRecord>& runs) {
  for (std::size_t k = 0; k < runs.size(); ++k) write_run_dir(root / ("run_" + std::to_string(k)), runs[k]);
}

int cmd_sweep(const std::string& plan_path) {
  const SweepPlan plan = load_plan(plan_path);
  const ConvergenceReport rep = eps_sweep(plan);
  const fs::path root = plan.base.output_dir;
  persist_runs(root, rep.runs);
  std::ostringstream o;
  o << "eps,I_eps\n";
  for (std::size_t k = 0; k < rep.eps.size(); ++k) o << fmt17(rep.eps[k]) << "," << fmt17(rep.budget[k]) << "\n";
  o << "pair,l1_u,l1_v\n";
  for (std::size_t k = 0; k < rep.du.size(); ++k) o << k << "," << fmt17(rep.du[k]) << "," << fmt17(rep.dv[k]) << "\n";
  o << "budget_decreasing = " << rep.budget_decreasing << "\nbudget_above_one = " << rep.budget_above_one
    << "\ndifferences_decreasing = " << rep.differences_decreasing << "\n";
  write_text(root / "sweep_report.txt", o.str());
  write_audits(root, {rep.flux});
  std::cout << o.str();
  return rep.passed() && is_success(rep.flux.verdict) ? kOk : kCheckFailed;
}

int cmd_refine(const std::string& plan_path) {
  SweepPlan plan = load_plan(plan_path);
  plan.axis = SweepPlan::Axis::ladder;
  const OrderReport rep = refinement_study(plan);
  const fs::path root = plan.base.output_dir;
  persist_runs(root, rep.runs);
  std::ostringstream o;
  o << "ladder = " << rep.ladder << "\nh,dt,err_u,err_v\n";
  for (std::size_t k = 0; k < rep.h.size(); ++k)
    o << fmt17(rep.h[k]) << "," << fmt17(rep.dt[k]) << "," << fmt17(rep.err_u[k]) << "," << fmt17(rep.err_v[k]) << "\n";
  o << "self_convergence_order_u = " << fmt17(rep.order_u) << "\nself_convergence_order_v = " << fmt17(rep.order_v)
    << "\n";
  write_text(root / "order_report.txt", o.str());
  std::cout << o.str();
  return kOk;
}

int cmd_alpha_scan(const std::string& plan_path) {
  SweepPlan plan = load_plan(plan_path);
  plan.axis = SweepPlan::Axis::alpha;
  const ComparisonReport rep = alpha_scan(plan);
  const fs::path root = plan.base.output_dir;
  persist_runs(root, rep.runs);
  std::ostringstream o;
  o << "alpha,flux_exponent,entropy_plateau_growth,plateau_verdict\n";
  bool failed = false;
  std::vector<AuditReport> reports;
  for (const auto& row : rep.rows) {
    o << fmt17(row.alpha) << "," << fmt17(row.flux_exponent) << "," << fmt17(row.plateau.get("entropy_plateau_growth"))
      << "," << to_string(row.plateau.verdict) << "\n";
    failed = failed || is_failure(row.plateau.verdict);
    AuditReport r = row.plateau;
    r.name += "_alpha_" + fmt17(row.alpha);
    reports.push_back(std::move(r));
  }
  write_text(root / "alpha_report.txt", o.str());
  write_audits(root, reports);
  std::cout << o.str();
  return failed ? kCheckFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator and audit engine for a degenerate migration-consumption system"};
  app.require_subcommand(1);

  std::string path, out;
  int threads = 0, levels = 3;
  bool no_rerun = false;
  double margin = -1.0;

  auto* sim = app.add_subcommand("simulate", "run a config and write its run directory");
  sim->add_option("config", path, "config file")->required();
  sim->add_option("-o,--out", out, "output directory (overrides output.dir)");
  sim->add_option("-j,--threads", threads, "thread count (overrides threads)");

  auto* aud = app.add_subcommand("audit", "run every applicable audit on a run directory");
  aud->add_option("rundir", path, "run directory")->required();
  aud->add_option("--levels", levels, "co-refined levels for identity and weak-form audits")->check(CLI::Range(1, 6));
  aud->add_flag("--no-rerun", no_rerun, "audit the stored run only, without refinement reruns");
  aud->add_option("--margin", margin, "inequality margin (default: audit.margin from the config)");

  auto* mot = app.add_subcommand("check-motility", "check the motility hypotheses and the cross-diffusion bound");
  mot->add_option("config", path, "config file")->required();

  auto* swp = app.add_subcommand("sweep", "eps sweep from a plan file");
  swp->add_option("plan", path, "plan file")->required();
  auto* ref = app.add_subcommand("refine", "refinement study from a plan file");
  ref->add_option("plan", path, "plan file")->required();
  auto* scan = app.add_subcommand("alpha-scan", "alpha scan from a plan file");
  scan->add_option("plan", path, "plan file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) return cmd_simulate(path, out, threads);
    if (*aud) return cmd_audit(path, levels, !no_rerun, margin);
    if (*mot) return cmd_check_motility(path);
    if (*swp) return cmd_sweep(path);
    if (*ref) return cmd_refine(path);
    if (*scan) return cmd_alpha_scan(path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const SolverError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kConfig;
}
