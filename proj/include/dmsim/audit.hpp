#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dmsim/config.hpp"
#include "dmsim/functionals.hpp"
#include "dmsim/motility.hpp"
#include "dmsim/report.hpp"
#include "dmsim/run.hpp"
#include "dmsim/series.hpp"

namespace dmsim {

struct AuditOptions {
  double margin = 0.1;       ///< relative slack for inequalities with empirical constants
  double order_min = 0.8;    ///< least acceptable observed order for identity residuals
  double order_max = 3.5;    ///< larger observed orders mean the levels are not one consistent family
  double floor_rel = 1e-8;   ///< residual norms below floor_rel * scale count as exact
  double plateau_tol = 0.05; ///< allowed relative growth of running maxima when T doubles
};

/// Co-refined ladder for identity audits: level k has 2^k times the cells per
/// axis and 2^-k times the step, at the same recording cadence in steps.
inline std::vector<RunConfig> co_refined_ladder(const RunConfig& base, int levels) {
  if (levels < 1) throw ContractError("ladder needs at least one level");
  std::vector<RunConfig> out;
  for (int k = 0; k < levels; ++k) {
    RunConfig c = base;
    const int f = 1 << k;
    c.grid.nx = base.grid.nx * f;
    if (base.grid.dim == 2) c.grid.ny = base.grid.ny * f;
    c.dt = base.dt / f;
    c.dt_cap = base.dt_cap / f;
    out.push_back(c);
  }
  return out;
}

namespace detail {

inline double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Verdict from residual norms on successively refined levels (refinement factor 2).
inline void order_verdict(AuditReport& r, const std::vector<double>& norms, const std::vector<double>& scales,
                          const AuditOptions& opt) {
  bool all_floor = true;
  for (std::size_t k = 0; k < norms.size(); ++k) {
    r.set("residual_L1_level" + std::to_string(k), norms[k]);
    r.set("scale_level" + std::to_string(k), scales[k]);
    if (!(norms[k] <= opt.floor_rel * scales[k])) all_floor = false;
  }
  r.tolerance = opt.order_min;
  if (all_floor) {
    r.verdict = AuditVerdict::pass;
    r.notes.push_back("residual at rounding level on every level");
    return;
  }
  if (norms.size() < 2) {
    r.verdict = AuditVerdict::inconclusive;
    r.notes.push_back("residual above floor and no refinement levels to measure an order");
    return;
  }
  bool ok = true;
  for (std::size_t k = 1; k < norms.size(); ++k) {
    const double s = std::log2(norms[k - 1] / norms[k]);
    r.slopes.push_back(s);
    if (!(s >= opt.order_min && s <= opt.order_max)) {
      ok = false;
      if (r.witness.empty())
        r.witness = "levels " + std::to_string(k - 1) + "->" + std::to_string(k) + " observed order " + fmt17(s);
    }
  }
  std::vector<double> x, y;
  for (std::size_t k = 0; k < norms.size(); ++k) {
    x.push_back(-static_cast<double>(k) * std::log(2.0));
    y.push_back(std::log(norms[k]));
  }
  r.set("least_squares_order", least_squares_slope(x, y));
  r.verdict = ok ? AuditVerdict::order_confirmed : AuditVerdict::fail;
}

struct IdentityResidual {
  std::vector<double> t;
  std::vector<double> r;
  double norm = 0.0;   ///< sum |r| dtau
  double scale = 0.0;  ///< sum of |term| dtau over all terms
};

}  // namespace detail

/// Forward-difference residual of the duality-norm identity at each record:
///   (Q_{m+1} - Q_m)/dtau + int u^2 phi_eps - ubar0 int u phi_eps,
/// where Q is half the squared duality norm of u - ubar0.
inline detail::IdentityResidual duality_residual(const RunRecord& rec) {
  const auto& s = rec.series;
  const auto& t = s.times();
  const auto& q = s.channel("duality");
  const auto& u2 = s.channel("u2_phi_eps");
  const auto& up = s.channel("u_phi_eps");
  const double ubar0 = rec.ubar0();
  detail::IdentityResidual out;
  for (std::size_t m = 0; m + 1 < t.size(); ++m) {
    const double tau = t[m + 1] - t[m];
    const double dq = (q[m + 1] - q[m]) / tau;
    const double res = dq + u2[m] - ubar0 * up[m];
    out.t.push_back(t[m]);
    out.r.push_back(res);
    out.norm += std::abs(res) * tau;
    out.scale += (std::abs(dq) + std::abs(u2[m]) + std::abs(ubar0 * up[m])) * tau;
  }
  return out;
}

/// Forward-difference residual of the entropy identity:
///   (H_{m+1} - H_m)/dtau + fisher_m + cross_m.
/// The scale includes the mass so a stationary entropy near zero is not
/// mistaken for a large relative residual.
inline detail::IdentityResidual entropy_residual(const RunRecord& rec) {
  const auto& s = rec.series;
  const auto& t = s.times();
  const auto& h = s.channel("entropy");
  const auto& f = s.channel("fisher");
  const auto& c = s.channel("entropy_cross");
  const auto& mass = s.channel("mass");
  detail::IdentityResidual out;
  for (std::size_t m = 0; m + 1 < t.size(); ++m) {
    const double tau = t[m + 1] - t[m];
    const double dh = (h[m + 1] - h[m]) / tau;
    const double res = dh + f[m] + c[m];
    out.t.push_back(t[m]);
    out.r.push_back(res);
    out.norm += std::abs(res) * tau;
    out.scale += (std::abs(dh) + std::abs(f[m]) + std::abs(c[m]) + mass[m] + std::abs(h[m])) * tau;
  }
  return out;
}

namespace detail {

inline AuditReport identity_audit(const std::string& name, const std::string& statement,
                                  const std::vector<const RunRecord*>& ladder, const AuditOptions& opt,
                                  IdentityResidual (*residual)(const RunRecord&)) {
  AuditReport r;
  r.name = name;
  r.statement = statement;
  if (ladder.empty()) throw ContractError(name + ": empty ladder");
  std::vector<double> norms, scales;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (ladder[k]->series.size() < 2) {
      r.verdict = AuditVerdict::inconclusive;
      r.notes.push_back("level " + std::to_string(k) + " has fewer than two records");
      return r;
    }
    IdentityResidual res = residual(*ladder[k]);
    norms.push_back(res.norm);
    scales.push_back(res.scale);
    if (k == 0) {
      r.residual_times = res.t;
      r.residuals = res.r;
    }
  }
  order_verdict(r, norms, scales, opt);
  return r;
}

}  // namespace detail

inline AuditReport audit_identity_duality(const std::vector<const RunRecord*>& ladder, const AuditOptions& opt = {}) {
  return detail::identity_audit("identity_duality",
                                "d/dt (1/2)|u - ubar0|_{-1}^2 + int u^2 phi_eps(v) = ubar0 int u phi_eps(v); "
                                "forward-difference residual decays at order >= order_min under co-refinement",
                                ladder, opt, &duality_residual);
}

inline AuditReport audit_identity_entropy(const std::vector<const RunRecord*>& ladder, const AuditOptions& opt = {}) {
  return detail::identity_audit("identity_entropy",
                                "d/dt int u ln u + int phi_eps(v)|grad u|^2/u = -int phi_eps'(v) grad u . grad v; "
                                "forward-difference residual decays at order >= order_min under co-refinement",
                                ladder, opt, &entropy_residual);
}

/// Mass drift, max principle for v, absorption budget and sign conditions, record by record.
inline AuditReport audit_conservation(const RunRecord& rec, const AuditOptions& = {}) {
  AuditReport r;
  r.name = "conservation";
  r.statement =
      "int u constant (relative drift <= 1e-10); max v nonincreasing (slack 1e-12); "
      "absorbed <= int v0 (1 + 1e-8); int v + absorbed = int v0; u >= 0, v > 0";
  r.tolerance = 1e-10;
  const auto& s = rec.series;
  if (s.empty()) throw ContractError("conservation audit: empty series");
  const auto& t = s.times();
  const auto& mass = s.channel("mass");
  const auto& maxv = s.channel("max_v");
  const auto& minv = s.channel("min_v");
  const auto& minu = s.channel("min_u");
  const auto& intv = s.channel("int_v");
  const auto& absorbed = s.channel("absorbed");
  const double m0 = mass[0], v0int = intv[0];
  const double mass_tol = 1e-10 * std::max(std::abs(m0), std::numeric_limits<double>::min());
  const double slack = 1e-12 * std::max(1.0, maxv[0]);
  double drift = 0.0, rise = 0.0, closure = 0.0;
  auto fail = [&](std::size_t k, const std::string& what) {
    if (r.witness.empty()) r.witness = "record " + std::to_string(k) + " (t = " + fmt17(t[k]) + "): " + what;
  };
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double d = std::abs(mass[k] - m0);
    drift = std::max(drift, d);
    r.residual_times.push_back(t[k]);
    r.residuals.push_back(mass[k] - m0);
    if (d > mass_tol) fail(k, "mass drift " + fmt17(d));
    if (k > 0) {
      const double up = maxv[k] - maxv[k - 1];
      rise = std::max(rise, up);
      if (up > slack) fail(k, "max v increased by " + fmt17(up));
    }
    if (absorbed[k] > v0int * (1.0 + 1e-8)) fail(k, "absorbed " + fmt17(absorbed[k]) + " exceeds int v0");
    const double c = std::abs(intv[k] + absorbed[k] - v0int);
    closure = std::max(closure, c);
    if (c > 1e-10 * std::max(v0int, std::numeric_limits<double>::min())) fail(k, "absorption budget off by " + fmt17(c));
    if (minu[k] < 0.0) fail(k, "negative u");
    if (!(minv[k] > 0.0)) fail(k, "nonpositive v");
  }
  r.set("max_mass_drift", drift);
  r.set("relative_mass_drift", m0 > 0.0 ? drift / m0 : drift);
  r.set("max_v_rise", rise);
  r.set("absorbed_final", absorbed.back());
  r.set("int_v0", v0int);
  r.set("budget_closure", closure);
  r.verdict = r.witness.empty() ? AuditVerdict::pass : AuditVerdict::fail;
  return r;
}

/// sup over (0, xi_max] of |phi'(xi)| / xi^(alpha-1), on a geometric grid.
inline double derivative_power_constant(const MotilitySpec& spec, double xi_max) {
  double c = 0.0;
  for (int k = 0; k <= 40 * 16; ++k) {
    const double xi = xi_max * std::exp2(-k / 16.0);
    c = std::max(c, std::abs(eval_phi_prime(spec, xi)) / std::pow(xi, spec.alpha - 1.0));
  }
  return c;
}

/// Quasi-energy inequality for alpha in (0,1), a = 1/alpha:
///   dE/dt + (1/2) fisher <= (c1/2) int |grad v|^4/v^3 + (c1 |v0|^(1-alpha)/2 + c2 a) int u^2 v^alpha,
/// E = int u ln u - a int u phi_eps(v). c1 is the sampled cross-diffusion
/// constant at xi_star = max v0, c2 = sup |phi'|/xi^(alpha-1). Pass when
/// LHS <= RHS (1 + margin) + allowance at every record after the first, dE/dt
/// being the backward difference (the scheme is implicit) and the allowance
/// its error estimate |E''| dtau / 2.
inline AuditReport audit_quasi_energy(const RunRecord& rec, const AuditOptions& opt = {}) {
  AuditReport r;
  r.name = "quasi_energy";
  r.statement = "d/dt{int u ln u - a int u phi_eps(v)} + (1/2) int phi_eps(v)|grad u|^2/u <= "
                "(c1/2) int |grad v|^4/v^3 + (c1 |v0|^(1-alpha)/2 + c2 a) int u^2 v^alpha";
  r.tolerance = opt.margin;
  const MotilitySpec spec = rec.config.motility.make();
  const double alpha = spec.alpha;
  if (!(alpha < 1.0)) {
    r.verdict = AuditVerdict::skipped;
    r.notes.push_back("applies to alpha in (0,1) only");
    return r;
  }
  const auto& s = rec.series;
  if (s.size() < 3) {
    r.verdict = AuditVerdict::inconclusive;
    r.notes.push_back("needs at least three records");
    return r;
  }
  const double a = 1.0 / alpha;
  const double vmax0 = s.at("max_v", 0);
  const InequalityReport ineq = verify_cross_diffusion_bound(spec, vmax0, {rec.config.eps}, 16, a, 2);
  const double c1 = std::max(ineq.c_emp, 0.0);
  const double c2 = derivative_power_constant(spec, vmax0);
  const double k2 = 0.5 * c1 * std::pow(vmax0, 1.0 - alpha) + c2 * a;
  r.set("a", a);
  r.set("c1", c1);
  r.set("c2", c2);
  r.set("margin", opt.margin);
  const auto& t = s.times();
  const auto& e = s.channel("quasi_energy");
  const auto& fisher = s.channel("fisher");
  const auto& g4 = s.channel("grad_v4_v3");
  const auto& u2va = s.channel("u2_v_alpha");
  double needed = -std::numeric_limits<double>::infinity();
  double worst_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n < t.size(); ++n) {
    const std::size_t m = n - 1;
    const double tau = t[n] - t[m];
    const double lhs = (e[n] - e[m]) / tau + 0.5 * fisher[n];
    const double rhs = 0.5 * c1 * g4[n] + k2 * u2va[n];
    const std::size_t j = m + 2 < t.size() ? m : m - 1;
    const double tau2 = 0.5 * (t[j + 2] - t[j]);
    const double allowance = std::abs(e[j + 2] - 2.0 * e[j + 1] + e[j]) / (2.0 * tau2);
    const double gap = lhs - rhs * (1.0 + opt.margin) - allowance;
    r.residual_times.push_back(t[n]);
    r.residuals.push_back(lhs - rhs);
    worst_gap = std::max(worst_gap, gap);
    if (rhs > 0.0) needed = std::max(needed, (lhs - allowance) / rhs - 1.0);
    if (gap > 0.0 && r.witness.empty())
      r.witness = "t = " + fmt17(t[n]) + ": lhs " + fmt17(lhs) + " > rhs " + fmt17(rhs) + " (allowance " +
                  fmt17(allowance) + ")";
  }
  r.set("worst_gap", worst_gap);
  r.set("margin_needed", std::isfinite(needed) ? std::max(needed, 0.0) : 0.0);
  r.verdict = r.witness.empty() ? AuditVerdict::pass : AuditVerdict::fail;
  return r;
}

/// Long-time bounds for alpha >= 1 on a run ending at t_end = 2T:
///  (i) I_eps(t) <= 1 + t + ubar0 |v0|_inf |Omega| t at every record;
///  (ii) running max of int u ln u over [T, 2T] exceeds the one over [T/2, T]
///       by less than plateau_tol, relative to max(|max over [T/2,T]|, |H(0)|);
///  (iii) int_0^t int v^(alpha-4)|grad v|^4 grows by less than plateau_tol
///       of its value at 2T between T and 2T (increments at rounding level ignored).
inline AuditReport audit_uniform_bounds(const RunRecord& rec, const AuditOptions& opt = {}) {
  AuditReport r;
  r.name = "uniform_bounds";
  r.statement = "I_eps(t) <= 1 + t + ubar0 |v0| |Omega| t; entropy running max and "
                "int int v^(alpha-4)|grad v|^4 plateau between T and 2T";
  r.tolerance = opt.plateau_tol;
  const double alpha = rec.config.motility.alpha;
  const auto& s = rec.series;
  const auto& t = s.times();
  const auto& bi = s.channel("budget_I");
  const auto& h = s.channel("entropy");
  const auto& w = s.channel("grad_v4_valpha");
  const double area = rec.grid().measure();
  const double bound_k = rec.ubar0() * s.at("max_v", 0) * area;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double tk = t[k] - t[0];
    const double bound = 1.0 + tk + bound_k * tk;
    worst = std::max(worst, bi[k] - bound);
    if (bi[k] > bound * (1.0 + 1e-12) && r.witness.empty())
      r.witness = "t = " + fmt17(t[k]) + ": I = " + fmt17(bi[k]) + " exceeds " + fmt17(bound);
  }
  r.set("budget_bound_gap_max", worst);
  r.set("I_final", bi.back());
  const double t2 = t.back(), t1 = t[0] + 0.5 * (t2 - t[0]), th = t[0] + 0.25 * (t2 - t[0]);
  double m1 = -std::numeric_limits<double>::infinity(), m2 = m1;
  double j1 = 0.0, j2 = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (t[k] >= th && t[k] <= t1) m1 = std::max(m1, h[k]);
    if (t[k] >= t1) m2 = std::max(m2, h[k]);
    if (k > 0) {
      const double piece = 0.5 * (w[k] + w[k - 1]) * (t[k] - t[k - 1]);
      if (t[k] <= t1 + 1e-12 * t2) j1 += piece;
      j2 += piece;
    }
  }
  const double hscale = std::max(std::abs(m1), std::abs(h[0]));
  const double growth = hscale > 0.0 ? (m2 - m1) / hscale : 0.0;
  // Increments below floor_rel * vmax^alpha (vmax/l)^4 |Omega| t are rounding
  // (e.g. spatially homogeneous v), not growth.
  const double vmax = s.at("max_v", 0);
  const double ell = std::min(rec.grid().length(0), rec.grid().dim() == 2 ? rec.grid().length(1) : rec.grid().length(0));
  const double jscale = std::pow(vmax, alpha) * std::pow(vmax / ell, 4) * area * (t2 - t[0]);
  const double jgrowth = j2 > 0.0 && (j2 - j1) > opt.floor_rel * jscale ? (j2 - j1) / j2 : 0.0;
  r.set("T", t1 - t[0]);
  r.set("entropy_max_first", m1);
  r.set("entropy_max_second", m2);
  r.set("entropy_plateau_growth", growth);
  r.set("weighted_dirichlet_T", j1);
  r.set("weighted_dirichlet_2T", j2);
  r.set("weighted_dirichlet_growth", jgrowth);
  r.set("weighted_dirichlet_scale", jscale);
  if (!(alpha >= 1.0)) {
    r.notes.push_back("alpha < 1: figures reported, not asserted");
    r.verdict = AuditVerdict::skipped;
    return r;
  }
  if (!(growth < opt.plateau_tol) && r.witness.empty())
    r.witness = "entropy running max grew by " + fmt17(growth) + " between [T/2,T] and [T,2T]";
  if (!(jgrowth < opt.plateau_tol) && r.witness.empty())
    r.witness = "weighted Dirichlet integral grew by " + fmt17(jgrowth) + " between T and 2T";
  r.verdict = r.witness.empty() ? AuditVerdict::pass : AuditVerdict::fail;
  return r;
}

/// Terms of the weighted-Hessian identity and inequality for a positive field w
/// with Neumann data, alpha in [1,2]:
///   identity:   -2A - (alpha-2)B + (alpha-2)C = -2G - (alpha-1)(2-alpha)K
///   inequality: A <= 2G + 2(alpha-2)^2 K
/// with A = int w^(alpha-2)|D^2 w|^2, B = int w^(alpha-3) grad w . grad|grad w|^2,
/// C = int w^(alpha-3)|grad w|^2 Lap w, G = int w^(2-alpha)|D^2 g|^2,
/// g = (w^(alpha-1) - 1)/(alpha-1) (ln w at alpha = 1), K = int w^(alpha-4)|grad w|^4.
/// Derivatives are centred differences with mirrored ghost cells.
struct WeightedHessianTerms {
  double A = 0, B = 0, C = 0, G = 0, K = 0;
  double identity_lhs = 0, identity_rhs = 0;
  double inequality_lhs = 0, inequality_rhs = 0;
  double allowance = 0;  ///< integrated defect of the underlying pointwise identity
  double scale = 0;
};

namespace detail {

struct Derivs {
  double gx = 0, gy = 0, hxx = 0, hyy = 0, hxy = 0;
};

inline std::vector<Derivs> centred_derivatives(const Grid& g, const std::vector<double>& f) {
  const int nx = g.cells(0);
  const int ny = g.dim() == 1 ? 1 : g.cells(1);
  const double hx = g.spacing(0), hy = g.dim() == 2 ? g.spacing(1) : 1.0;
  auto at = [&](int i, int j) {
    i = i < 0 ? -i - 1 : (i >= nx ? 2 * nx - i - 1 : i);
    j = j < 0 ? -j - 1 : (j >= ny ? 2 * ny - j - 1 : j);
    return f[g.index(i, j)];
  };
  std::vector<Derivs> out(g.size());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      Derivs d;
      const double c = at(i, j);
      d.gx = (at(i + 1, j) - at(i - 1, j)) / (2 * hx);
      d.hxx = (at(i + 1, j) - 2 * c + at(i - 1, j)) / (hx * hx);
      if (g.dim() == 2) {
        d.gy = (at(i, j + 1) - at(i, j - 1)) / (2 * hy);
        d.hyy = (at(i, j + 1) - 2 * c + at(i, j - 1)) / (hy * hy);
        d.hxy = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4 * hx * hy);
      }
      out[g.index(i, j)] = d;
    }
  return out;
}

inline double generalized_log(double w, double alpha) {
  const double k = alpha - 1.0;
  if (k == 0.0) return std::log(w);
  return std::expm1(k * std::log(w)) / k;
}

}  // namespace detail

inline WeightedHessianTerms weighted_hessian_terms(const Field& w, double alpha) {
  if (!(alpha >= 1.0) || !(alpha <= 2.0)) throw DomainError("weighted Hessian identity needs alpha in [1,2]");
  detail::require_positive(w, "weighted_hessian_terms");
  const Grid& g = w.grid();
  std::vector<double> wv(w.values().begin(), w.values().end());
  std::vector<double> gv(wv.size());
  for (std::size_t i = 0; i < wv.size(); ++i) gv[i] = detail::generalized_log(wv[i], alpha);
  const auto dw = detail::centred_derivatives(g, wv);
  const auto dg = detail::centred_derivatives(g, gv);
  WeightedHessianTerms t;
  const double vol = g.cell_volume();
  double defect = 0.0;
  for (std::size_t i = 0; i < wv.size(); ++i) {
    const double x = wv[i];
    const auto& d = dw[i];
    const auto& e = dg[i];
    const double h2 = d.hxx * d.hxx + d.hyy * d.hyy + 2 * d.hxy * d.hxy;
    const double grad2 = d.gx * d.gx + d.gy * d.gy;
    const double hgg = d.gx * (d.hxx * d.gx + d.hxy * d.gy) + d.gy * (d.hxy * d.gx + d.hyy * d.gy);
    const double lap = d.hxx + d.hyy;
    const double gh2 = e.hxx * e.hxx + e.hyy * e.hyy + 2 * e.hxy * e.hxy;
    t.A += std::pow(x, alpha - 2) * h2 * vol;
    t.B += std::pow(x, alpha - 3) * 2.0 * hgg * vol;
    t.C += std::pow(x, alpha - 3) * grad2 * lap * vol;
    t.G += std::pow(x, 2 - alpha) * gh2 * vol;
    t.K += std::pow(x, alpha - 4) * grad2 * grad2 * vol;
    const double pointwise = std::pow(x, 4 - 2 * alpha) * gh2 - 2 * (alpha - 2) * hgg / x -
                             (alpha - 2) * (alpha - 2) * grad2 * grad2 / (x * x);
    defect += std::pow(x, alpha - 2) * std::abs(h2 - pointwise) * vol;
  }
  t.identity_lhs = -2 * t.A - (alpha - 2) * t.B + (alpha - 2) * t.C;
  t.identity_rhs = -2 * t.G - (alpha - 1) * (2 - alpha) * t.K;
  t.inequality_lhs = t.A;
  t.inequality_rhs = 2 * t.G + 2 * (alpha - 2) * (alpha - 2) * t.K;
  t.allowance = defect;
  t.scale = 2 * t.A + std::abs(alpha - 2) * (std::abs(t.B) + std::abs(t.C)) + 2 * t.G +
            (alpha - 1) * (2 - alpha) * t.K;
  return t;
}

/// Identity residual on each level (coarse to fine, factor 2) must decay at
/// order >= order_min; the inequality must hold on every level up to the
/// integrated pointwise defect.
inline AuditReport audit_weighted_hessian(const std::vector<Field>& levels, double alpha, const AuditOptions& opt = {}) {
  AuditReport r;
  r.name = "weighted_hessian";
  r.statement = "-2 int w^(a-2)|D^2w|^2 - (a-2) int w^(a-3) grad w.grad|grad w|^2 + (a-2) int w^(a-3)|grad w|^2 Lap w "
                "= -(2/(a-1)^2) int w^(2-a)|D^2 w^(a-1)|^2 - (a-1)(2-a) int w^(a-4)|grad w|^4, and the matching "
                "upper bound for int w^(a-2)|D^2 w|^2";
  if (levels.empty()) throw ContractError("weighted Hessian audit: no levels");
  std::vector<double> norms, scales;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const WeightedHessianTerms t = weighted_hessian_terms(levels[k], alpha);
    const double res = t.identity_lhs - t.identity_rhs;
    norms.push_back(std::abs(res));
    scales.push_back(t.scale);
    r.residual_times.push_back(static_cast<double>(levels[k].grid().cells(0)));
    r.residuals.push_back(res);
    const std::string lv = "_level" + std::to_string(k);
    r.set("inequality_lhs" + lv, t.inequality_lhs);
    r.set("inequality_rhs" + lv, t.inequality_rhs);
    r.set("allowance" + lv, t.allowance);
    if (t.inequality_lhs > t.inequality_rhs + t.allowance + opt.floor_rel * t.scale && r.witness.empty())
      r.witness = "inequality violated on level " + std::to_string(k);
  }
  const bool ineq_ok = r.witness.empty();
  detail::order_verdict(r, norms, scales, opt);
  if (!ineq_ok) r.verdict = AuditVerdict::fail;
  r.notes.push_back("residual_times hold the cell count of each level");
  return r;
}

/// Samples f on base.refined(2^k) for k < levels and runs the audit.
inline AuditReport audit_weighted_hessian(const std::function<double(double, double)>& f, const Grid& base, int levels,
                                          double alpha, const AuditOptions& opt = {}) {
  std::vector<Field> fields;
  for (int k = 0; k < levels; ++k) fields.push_back(Field::sample(base.refined(1 << k), f));
  return audit_weighted_hessian(fields, alpha, opt);
}

/// psi(x,y) chi(t): psi = 1 + amp cos(mode pi x/Lx) [cos(mode pi y/Ly)], chi = (1 - t/T)^power.
/// psi has zero normal derivative, so int grad q . grad psi = -int q Lap psi exactly.
struct TestFunction {
  double amp = 0.5;
  int mode = 1;
  int power = 4;

  double psi(const Grid& g, double x, double y) const {
    double c = std::cos(mode * M_PI * x / g.length(0));
    if (g.dim() == 2) c *= std::cos(mode * M_PI * y / g.length(1));
    return 1.0 + amp * c;
  }
  double lap_psi(const Grid& g, double x, double y) const {
    double k2 = std::pow(mode * M_PI / g.length(0), 2);
    if (g.dim() == 2) k2 += std::pow(mode * M_PI / g.length(1), 2);
    return -k2 * (psi(g, x, y) - 1.0);
  }
  double chi(double t, double T) const { return std::pow(1.0 - t / T, power); }
  double dchi(double t, double T) const { return -power / T * std::pow(1.0 - t / T, power - 1); }
};

struct WeakResiduals {
  double u_eps = 0, v_eps = 0;      ///< residuals of the regularised forms
  double u_limit = 0, v_limit = 0;  ///< phi_eps -> phi, uv/(1+eps u) -> uv
  double scale_u = 0, scale_v = 0;
};

/// Space-time quadrature (midpoint in space, trapezoid over snapshots) of
///   int int u psi_t + int u0 psi(0) - int int grad(u phi(v)) . grad psi
///   int int v psi_t + int v0 psi(0) - int int grad v . grad psi - int int uv psi.
inline WeakResiduals weak_residuals(const RunRecord& rec, const TestFunction& tf) {
  if (rec.snapshots.size() < 2) throw ContractError("weak-form audit needs stored snapshots");
  const Grid g = rec.grid();
  const RegularizedMotility law(rec.config.motility.make(), rec.config.eps);
  const RegularizedMotility bare(rec.config.motility.make(), 0.0);
  const double eps = rec.config.eps;
  const double T = rec.snapshots.back().t;
  const Field psi = Field::sample(g, [&](double x, double y) { return tf.psi(g, x, y); });
  const Field lap = Field::sample(g, [&](double x, double y) { return tf.lap_psi(g, x, y); });
  const double vol = g.cell_volume();
  struct Slice {
    double ut = 0, vt = 0, flux_eps = 0, flux_lim = 0, lapv = 0, abs_eps = 0, abs_lim = 0;
    double mag_u = 0, mag_v = 0;
  };
  std::vector<Slice> sl;
  std::vector<double> ts;
  for (const auto& s : rec.snapshots) {
    Slice q;
    const double c = tf.chi(s.t, T), dc = tf.dchi(s.t, T);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double u = s.u[i], v = s.v[i];
      q.ut += u * psi[i] * dc * vol;
      q.vt += v * psi[i] * dc * vol;
      q.flux_eps += -u * law.value(v) * lap[i] * c * vol;
      q.flux_lim += -u * bare.value(v) * lap[i] * c * vol;
      q.lapv += -v * lap[i] * c * vol;
      q.abs_eps += u * v / (1.0 + eps * u) * psi[i] * c * vol;
      q.abs_lim += u * v * psi[i] * c * vol;
      q.mag_u += (std::abs(u * psi[i] * dc) + std::abs(u * law.value(v) * lap[i] * c)) * vol;
      q.mag_v += (std::abs(v * psi[i] * dc) + std::abs(v * lap[i] * c) + std::abs(u * v * psi[i] * c)) * vol;
    }
    sl.push_back(q);
    ts.push_back(s.t);
  }
  auto trap = [&](auto get) {
    double acc = 0.0;
    for (std::size_t k = 1; k < sl.size(); ++k) acc += 0.5 * (get(sl[k]) + get(sl[k - 1])) * (ts[k] - ts[k - 1]);
    return acc;
  };
  const auto& s0 = rec.snapshots.front();
  double u0psi = 0.0, v0psi = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    u0psi += s0.u[i] * psi[i] * vol;
    v0psi += s0.v[i] * psi[i] * vol;
  }
  const double c0 = tf.chi(s0.t, T);
  WeakResiduals w;
  const double ut = trap([](const Slice& q) { return q.ut; });
  const double vt = trap([](const Slice& q) { return q.vt; });
  w.u_eps = ut + u0psi * c0 - trap([](const Slice& q) { return q.flux_eps; });
  w.u_limit = ut + u0psi * c0 - trap([](const Slice& q) { return q.flux_lim; });
  const double lv = trap([](const Slice& q) { return q.lapv; });
  w.v_eps = vt + v0psi * c0 - lv - trap([](const Slice& q) { return q.abs_eps; });
  w.v_limit = vt + v0psi * c0 - lv - trap([](const Slice& q) { return q.abs_lim; });
  w.scale_u = trap([](const Slice& q) { return q.mag_u; }) + std::abs(u0psi * c0);
  w.scale_v = trap([](const Slice& q) { return q.mag_v; }) + std::abs(v0psi * c0);
  return w;
}

/// Residuals of the regularised weak forms must decay at order >= order_min
/// under co-refinement; the limit-form residuals (which keep an O(eps) part)
/// are reported alongside.
inline AuditReport audit_weak_solution(const std::vector<const RunRecord*>& ladder, const TestFunction& tf = {},
                                       const AuditOptions& opt = {}) {
  AuditReport r;
  r.name = "weak_solution";
  r.statement = "int int u psi_t + int u0 psi(0) = int int grad(u phi_eps(v)).grad psi and "
                "int int v psi_t + int v0 psi(0) = int int grad v.grad psi + int int uv/(1+eps u) psi";
  if (ladder.empty()) throw ContractError("weak-form audit: empty ladder");
  std::vector<double> norms, scales;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (ladder[k]->snapshots.size() < 2) {
      r.verdict = AuditVerdict::inconclusive;
      r.notes.push_back("level " + std::to_string(k) + " stores fewer than two snapshots");
      return r;
    }
    const WeakResiduals w = weak_residuals(*ladder[k], tf);
    const std::string lv = "_level" + std::to_string(k);
    r.set("u_residual" + lv, w.u_eps);
    r.set("v_residual" + lv, w.v_eps);
    r.set("u_limit_residual" + lv, w.u_limit);
    r.set("v_limit_residual" + lv, w.v_limit);
    r.residual_times.push_back(static_cast<double>(k));
    r.residuals.push_back(std::abs(w.u_eps) + std::abs(w.v_eps));
    norms.push_back(std::abs(w.u_eps) + std::abs(w.v_eps));
    scales.push_back(w.scale_u + w.scale_v);
  }
  detail::order_verdict(r, norms, scales, opt);
  r.notes.push_back("residual_times hold the level number");
  return r;
}

/// Time integral of int |grad(u phi_eps(v))|^p over I_eps(T) for each run; no
/// blow-up when the ratio varies by less than a factor 10 across the runs.
inline AuditReport audit_flux_integrability(const std::vector<const RunRecord*>& runs, const AuditOptions& = {}) {
  AuditReport r;
  r.name = "flux_integrability";
  r.statement = "int_0^T int |grad(u phi_eps(v))|^p / I_eps(T) stays bounded across eps (max/min ratio < 10)";
  r.tolerance = 10.0;
  if (runs.empty()) throw ContractError("flux audit: no runs");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  bool finite = true;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& s = runs[k]->series;
    const double ratio = time_integral(s, "flux") / s.channel("budget_I").back();
    r.set("eps_run" + std::to_string(k), runs[k]->config.eps);
    r.set("ratio_run" + std::to_string(k), ratio);
    r.residual_times.push_back(runs[k]->config.eps);
    r.residuals.push_back(ratio);
    if (!std::isfinite(ratio)) finite = false;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  r.set("flux_exponent", flux_exponent(runs[0]->config.motility.alpha));
  const double spread = hi == 0.0 ? 1.0 : (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
  r.set("ratio_spread", spread);
  if (!finite) r.witness = "non-finite flux ratio";
  else if (!(spread < 10.0)) r.witness = "ratio spread " + fmt17(spread) + " across runs";
  r.verdict = r.witness.empty() ? AuditVerdict::pass : AuditVerdict::fail;
  return r;
}

/// Every audit that applies to one run. Identity and weak-form audits use
/// `ladder` (level 0 should be `rec` itself); pass {&rec} to audit without
/// refinement, in which case they only pass if the residual is at rounding level.
inline std::vector<AuditReport> audit_run(const RunRecord& rec, const std::vector<const RunRecord*>& ladder,
                                          const AuditOptions& opt = {}) {
  std::vector<AuditReport> out;
  out.push_back(audit_conservation(rec, opt));
  out.push_back(audit_identity_duality(ladder, opt));
  out.push_back(audit_identity_entropy(ladder, opt));
  out.push_back(audit_quasi_energy(rec, opt));
  if (rec.config.motility.alpha >= 1.0) out.push_back(audit_uniform_bounds(rec, opt));
  const double alpha = rec.config.motility.alpha;
  if (alpha >= 1.0 && alpha <= 2.0 && rec.config.init_v.kind != "file") {
    std::vector<Field> levels;
    for (int k = 0; k < 3; ++k) {
      RunConfig c = rec.config;
      c.grid.nx <<= k;
      c.grid.ny <<= k;
      levels.push_back(make_initial_data(c).v0);
    }
    AuditReport wh = audit_weighted_hessian(levels, alpha, opt);
    wh.notes.push_back("applied to the v0 preset sampled on the run grid refined by 1, 2 and 4");
    out.push_back(std::move(wh));
  }
  if (rec.config.keep_snapshots) {
    out.push_back(audit_weak_solution(ladder, TestFunction{}, opt));
  } else {
    AuditReport weak;
    weak.name = "weak_solution";
    weak.statement = "weak-form residuals";
    weak.verdict = AuditVerdict::skipped;
    weak.notes.push_back("run does not keep snapshots (record.snapshots = false)");
    out.push_back(std::move(weak));
  }
  out.push_back(audit_flux_integrability({&rec}, opt));
  return out;
}

}  // namespace dmsim
