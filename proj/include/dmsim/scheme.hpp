#pragma once

#include <cmath>
#include <string>

#include "dmsim/error.hpp"
#include "dmsim/grid.hpp"
#include "dmsim/motility.hpp"
#include "dmsim/solvers.hpp"

namespace dmsim {

struct DtPolicy {
  enum class Kind { fixed, adaptive };
  Kind kind = Kind::fixed;
  double dt = 1e-3;   ///< fixed step
  double cap = 1e-2;  ///< adaptive upper bound
  double cfl = 2.0;   ///< adaptive factor in cfl * h^2 / max phi_eps(v)

  static DtPolicy fixed(double dt) { return {Kind::fixed, dt, dt, 2.0}; }
  static DtPolicy adaptive(double cap, double cfl = 2.0) { return {Kind::adaptive, cap, cap, cfl}; }
};

struct SimParams {
  double eps = 0.1;
  MotilitySpec motility;
  DtPolicy dt;
  double t_end = 1.0;
  int record_every = 1;

  void validate() const {
    motility.check();
    if (!(eps >= 0.0) || !(eps <= 1.0)) throw ConfigError("eps must lie in [0,1]");
    if (eps == 0.0 && motility.alpha < 1.0)
      throw ConfigError("eps = 0 is only allowed for alpha >= 1; the degenerate system needs eps > 0");
    const double step = dt.kind == DtPolicy::Kind::fixed ? dt.dt : dt.cap;
    if (!(step > 0.0)) throw ConfigError("time step must be positive");
    if (!(dt.cfl > 0.0)) throw ConfigError("cfl factor must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("end time must be nonnegative");
    if (record_every < 1) throw ConfigError("recording cadence must be >= 1 step");
  }

  double diffusivity(double v) const { return eval_phi(motility, v) + eps; }
  RegularizedMotility law() const { return RegularizedMotility(motility, eps); }
};

struct InitialData {
  Field u0;
  Field v0;

  /// u0 >= 0 and v0 >= 1e-14 cellwise, finite, on the same grid.
  void validate() const {
    require_same_grid(u0.grid(), v0.grid());
    if (!u0.all_finite() || !v0.all_finite()) throw ConfigError("initial data must be finite");
    if (u0.min() < 0.0) throw ConfigError("initial u must be nonnegative");
    if (v0.min() < 1e-14)
      throw ConfigError("initial v must be strictly positive in the closed domain (found min " +
                        std::to_string(v0.min()) + " < 1e-14)");
  }
};

struct SimState {
  double t = 0.0;
  Field u;
  Field v;
  long step = 0;
  double absorbed = 0.0;         ///< int_0^t int u v/(1+eps u)
  double budget_integral = 0.0;  ///< int_0^t int eps u^2 v/(1+eps u)

  static SimState initial(const InitialData& d) {
    d.validate();
    return SimState{0.0, d.u0, d.v0, 0, 0.0, 0.0};
  }
};

/// Backward Euler for u_t = Lap(D u) with D = phi_eps(v^n) frozen:
/// solves (diag(1/D) - dt L) w = u^n and returns u^{n+1} = w / D.
/// The result is renormalised by sum(u^n)/sum(u^{n+1}), a factor of
/// 1 + O(solver residual), so the discrete mass is conserved to rounding
/// whatever the solver tolerance.
inline Field step_u(const SimState& s, const SimParams& p, double dt, const SolverOptions& opt = {}) {
  if (!(dt > 0.0)) throw DomainError("step_u: dt must be positive");
  const Grid& g = s.u.grid();
  Field d = map(s.v, [&](double v) { return p.diffusivity(v); });
  for (double x : d.values())
    if (!(x > 0.0) || !std::isfinite(x) || x < p.eps) throw DomainError("step_u: diffusivity below eps");
  Field inv_d = map(d, [](double x) { return 1.0 / x; });
  Field w = solve_spd(g, inv_d, dt, s.u, opt);
  Field next = zip(w, d, [](double wi, double di) { return std::max(wi / di, 0.0); });
  double before = 0.0, after = 0.0;
  for (double x : s.u.values()) before += x;
  for (double x : next.values()) after += x;
  if (after > 0.0 && before > 0.0) {
    const double scale = before / after;
    for (auto& x : next.values()) x *= scale;
  }
  return next;
}

/// Per-cell absorption factor exp(dt r) with r = u/(1+eps u); the identity
/// exp(dt r) - 1 is the step's discrete absorption per unit v^{n+1}.
inline double absorption_factor(double u, double eps, double dt) {
  return std::exp(dt * u / (1.0 + eps * u));
}

/// Implicit diffusion with exponentially fitted absorption:
/// solves (diag(exp(dt r)) - dt L) v^{n+1} = v^n, r = u_new/(1+eps u_new).
/// The diagonal is >= 1, so the matrix is an M-matrix with row sums >= 1:
/// v stays positive and max v cannot grow. Spatially homogeneous data
/// decay by exactly exp(-dt r) per step.
inline Field step_v(const SimState& s, const Field& u_new, double eps, double dt, const SolverOptions& opt = {}) {
  if (!(dt > 0.0)) throw DomainError("step_v: dt must be positive");
  if (u_new.min() < 0.0) throw DomainError("step_v: u must be nonnegative");
  Field diag = map(u_new, [&](double u) { return absorption_factor(u, eps, dt); });
  return solve_spd(s.v.grid(), diag, dt, s.v, opt);
}

/// One lagged step: u first with v frozen, then v with the new u.
/// Accumulators advance with the step's own discrete absorption, so
/// int v(t) + absorbed = int v0 holds to rounding.
inline SimState advance(const SimState& s, const SimParams& p, double dt, const SolverOptions& opt = {}) {
  Field u_new = step_u(s, p, dt, opt);
  Field v_new = step_v(s, u_new, p.eps, dt, opt);
  const Grid& g = s.u.grid();
  double absorbed = 0.0, budget = 0.0;
  for (std::size_t i = 0; i < u_new.size(); ++i) {
    const double u = u_new[i];
    const double v = v_new[i];
    absorbed += std::expm1(dt * u / (1.0 + p.eps * u)) * v;
    budget += dt * p.eps * u * u * v / (1.0 + p.eps * u);
  }
  SimState out;
  out.t = s.t + dt;
  out.u = std::move(u_new);
  out.v = std::move(v_new);
  out.step = s.step + 1;
  out.absorbed = s.absorbed + absorbed * g.cell_volume();
  out.budget_integral = s.budget_integral + budget * g.cell_volume();
  return out;
}

/// Fixed: the configured step. Adaptive: min(cap, cfl * h^2 / max phi_eps(v)).
inline double select_dt(const Field& v, const RegularizedMotility& m, const DtPolicy& policy) {
  if (policy.kind == DtPolicy::Kind::fixed) return policy.dt;
  double dmax = 0.0;
  for (double x : v.values()) dmax = std::max(dmax, m.value(x));
  const double h = v.grid().min_spacing();
  if (dmax <= 0.0) return policy.cap;
  return std::min(policy.cap, policy.cfl * h * h / dmax);
}

inline double select_dt(const SimState& s, const SimParams& p) {
  if (p.dt.kind == DtPolicy::Kind::fixed) return p.dt.dt;
  double dmax = 0.0;
  for (double x : s.v.values()) dmax = std::max(dmax, p.diffusivity(x));
  const double h = s.v.grid().min_spacing();
  return std::min(p.dt.cap, p.dt.cfl * h * h / dmax);
}

}  // namespace dmsim
