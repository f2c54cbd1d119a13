#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dmsim/error.hpp"
#include "dmsim/grid.hpp"
#include "dmsim/motility.hpp"
#include "dmsim/scheme.hpp"
#include "dmsim/solvers.hpp"

namespace dmsim {

struct QuasiEnergyParams {
  double a = 2.0;

  /// a = 1/alpha, the choice that makes the quasi-energy dissipative for alpha in (0,1).
  static QuasiEnergyParams for_alpha(double alpha) {
    if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
    return {1.0 / alpha};
  }
};

namespace detail {

inline void require_nonnegative(const Field& u, const char* who) {
  for (double x : u.values())
    if (x < 0.0) throw DomainError(std::string(who) + ": field must be nonnegative");
}

inline void require_positive(const Field& v, const char* who) {
  for (double x : v.values())
    if (!(x > 0.0)) throw DomainError(std::string(who) + ": field must be strictly positive");
}

// Visits every interior face once as fn(left, right, h_axis, dual_volume).
template <class Fn>
inline void for_each_interior_face(const Grid& g, Fn&& fn) {
  const int nx = g.cells(0);
  const int ny = g.dim() == 1 ? 1 : g.cells(1);
  const double vol = g.cell_volume();
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) fn(g.index(i - 1, j), g.index(i, j), g.spacing(0), vol);
  if (g.dim() == 2)
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i) fn(g.index(i, j - 1), g.index(i, j), g.spacing(1), vol);
}

// Cell-centred gradient component along `axis`: mean of the two face
// differences bounding the cell, boundary faces contributing 0.
inline std::vector<double> cell_gradient(const Field& f, int axis) {
  const Grid& g = f.grid();
  const int nx = g.cells(0);
  const int ny = g.dim() == 1 ? 1 : g.cells(1);
  std::vector<double> out(g.size(), 0.0);
  const double h = g.spacing(axis);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double lo = 0.0, hi = 0.0;
      const std::size_t c = g.index(i, j);
      if (axis == 0) {
        if (i > 0) lo = (f[c] - f[g.index(i - 1, j)]) / h;
        if (i + 1 < nx) hi = (f[g.index(i + 1, j)] - f[c]) / h;
      } else {
        if (j > 0) lo = (f[c] - f[g.index(i, j - 1)]) / h;
        if (j + 1 < ny) hi = (f[g.index(i, j + 1)] - f[c]) / h;
      }
      out[c] = 0.5 * (lo + hi);
    }
  return out;
}

}  // namespace detail

/// Face quadrature of weight * |grad f|^p over Omega.
/// Every face (boundary faces included, with half a dual cell and zero normal
/// derivative) carries the normal difference plus, in 2D, a tangential
/// component averaged from the adjacent cells. The sum over both face
/// families is divided by the dimension.
/// `weight(left, right)` receives the adjacent cell indices (equal on boundary faces).
template <class Weight>
inline double face_gradient_power_integral(const Field& f, double p, Weight&& weight) {
  const Grid& g = f.grid();
  const int nx = g.cells(0);
  const int ny = g.dim() == 1 ? 1 : g.cells(1);
  const double vol = g.cell_volume();
  auto power = [p](double sq) { return sq == 0.0 ? 0.0 : std::pow(sq, 0.5 * p); };
  if (g.dim() == 1) {
    double s = 0.0;
    for (int i = 1; i < nx; ++i) {
      const double gn = (f[i] - f[i - 1]) / g.spacing(0);
      s += weight(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(i)) * power(gn * gn) * vol;
    }
    return s;
  }
  const std::vector<double> cx = detail::cell_gradient(f, 0);
  const std::vector<double> cy = detail::cell_gradient(f, 1);
  double s = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) {  // x-faces
      const std::size_t l = g.index(std::max(i - 1, 0), j), r = g.index(std::min(i, nx - 1), j);
      const bool boundary = i == 0 || i == nx;
      const double gn = boundary ? 0.0 : (f[r] - f[l]) / g.spacing(0);
      const double gt = boundary ? cy[l] : 0.5 * (cy[l] + cy[r]);
      s += weight(l, r) * power(gn * gn + gt * gt) * (boundary ? 0.5 * vol : vol);
    }
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i) {  // y-faces
      const std::size_t l = g.index(i, std::max(j - 1, 0)), r = g.index(i, std::min(j, ny - 1));
      const bool boundary = j == 0 || j == ny;
      const double gn = boundary ? 0.0 : (f[r] - f[l]) / g.spacing(1);
      const double gt = boundary ? cx[l] : 0.5 * (cx[l] + cx[r]);
      s += weight(l, r) * power(gn * gn + gt * gt) * (boundary ? 0.5 * vol : vol);
    }
  return 0.5 * s;
}

/// int u ln u, with 0 ln 0 = 0.
inline double log_entropy(const Field& u) {
  double s = 0.0;
  for (double x : u.values()) {
    if (x < 0.0) throw DomainError("log_entropy: u must be nonnegative");
    if (x > 0.0) s += x * std::log(x);
  }
  return s * u.grid().cell_volume();
}

/// 4 * sum over interior faces of phi_eps(mean v) |diff sqrt u|^2 / h^2 * dual volume,
/// the discrete int phi_eps(v) |grad u|^2 / u.
inline double fisher_dissipation(const Field& u, const Field& v, const RegularizedMotility& m) {
  require_same_grid(u.grid(), v.grid());
  detail::require_nonnegative(u, "fisher_dissipation");
  detail::require_nonnegative(v, "fisher_dissipation");
  double s = 0.0;
  detail::for_each_interior_face(u.grid(), [&](std::size_t l, std::size_t r, double h, double vol) {
    const double d = (std::sqrt(u[r]) - std::sqrt(u[l])) / h;
    s += m.value(0.5 * (v[l] + v[r])) * d * d * vol;
  });
  return 4.0 * s;
}

/// Face quadrature of int phi_eps'(v) grad u . grad v (normal components).
inline double entropy_cross_term(const Field& u, const Field& v, const RegularizedMotility& m) {
  require_same_grid(u.grid(), v.grid());
  detail::require_positive(v, "entropy_cross_term");
  double s = 0.0;
  detail::for_each_interior_face(u.grid(), [&](std::size_t l, std::size_t r, double h, double vol) {
    s += m.derivative(0.5 * (v[l] + v[r])) * (u[r] - u[l]) / h * (v[r] - v[l]) / h * vol;
  });
  return s;
}

/// int u phi_eps(v)
inline double motility_moment(const Field& u, const Field& v, const RegularizedMotility& m) {
  require_same_grid(u.grid(), v.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * m.value(v[i]);
  return s * u.grid().cell_volume();
}

/// int u ln u - a int u phi_eps(v)
inline double quasi_energy(const Field& u, const Field& v, const RegularizedMotility& m,
                           const QuasiEnergyParams& q) {
  if (!(q.a >= 0.0)) throw DomainError("quasi_energy: a must be nonnegative");
  return log_entropy(u) - q.a * motility_moment(u, v, m);
}

/// 1/2 int |grad psi|^2 with -L psi = u - ubar0 and mean(psi) = 0, i.e. the
/// squared negative-Sobolev (duality) norm of u - ubar0.
inline double duality_norm(const Field& u, double ubar0, const SolverOptions& opt = {}) {
  const Grid& g = u.grid();
  double mean = 0.0;
  for (double x : u.values()) mean += x;
  mean /= static_cast<double>(u.size());
  if (std::abs(mean - ubar0) > 1e-10 * std::max(std::abs(ubar0), std::abs(mean)) &&
      std::abs(mean - ubar0) > 1e-300)
    throw DomainError("duality_norm: mean of u differs from ubar0");
  Field e = map(u, [&](double x) { return x - mean; });
  detail::project_mean_free(e.values());  // second pass removes rounding at the scale of e
  Field psi = solve_neumann_poisson_zero_mean(g, e, opt);
  double s = 0.0;
  detail::for_each_interior_face(g, [&](std::size_t l, std::size_t r, double h, double vol) {
    const double d = (psi[r] - psi[l]) / h;
    s += d * d * vol;
  });
  return 0.5 * s;
}

/// int v^vpow |grad v|^gpow with harmonic face means of v for negative powers
/// and arithmetic means for positive ones.
inline double weighted_gradient_integral(const Field& v, double vpow, double gpow) {
  if (!(gpow > 0.0)) throw DomainError("weighted_gradient_integral: gradient power must be positive");
  if (vpow != 0.0) detail::require_positive(v, "weighted_gradient_integral");
  return face_gradient_power_integral(v, gpow, [&](std::size_t l, std::size_t r) {
    if (vpow == 0.0) return 1.0;
    const double a = v[l], b = v[r];
    const double mean = vpow < 0.0 ? 2.0 * a * b / (a + b) : 0.5 * (a + b);
    return std::pow(mean, vpow);
  });
}

/// int |grad(u phi_eps(v))|^p
inline double flux_norm(const Field& u, const Field& v, const RegularizedMotility& m, double p) {
  if (!(p >= 1.0)) throw DomainError("flux_norm: p must be >= 1");
  Field q = zip(u, v, [&](double a, double b) { return a * m.value(b); });
  return face_gradient_power_integral(q, p, [](std::size_t, std::size_t) { return 1.0; });
}

/// int u v / (1 + eps u)
inline double absorption_rate(const Field& u, const Field& v, double eps) {
  require_same_grid(u.grid(), v.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i] / (1.0 + eps * u[i]);
  return s * u.grid().cell_volume();
}

/// int eps u^2 v / (1 + eps u)
inline double budget_density(const Field& u, const Field& v, double eps) {
  require_same_grid(u.grid(), v.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += eps * u[i] * u[i] * v[i] / (1.0 + eps * u[i]);
  return s * u.grid().cell_volume();
}

/// Names of the recorded channels, in series column order.
inline const std::vector<std::string>& channel_names() {
  static const std::vector<std::string> names = {
      "mass",           "int_v",         "max_v",          "min_v",          "min_u",
      "absorbed",       "budget_I",      "absorption_rate", "budget_density", "entropy",
      "fisher",         "entropy_cross", "quasi_energy",   "u_phi_eps",      "u_phi",
      "duality",        "u2_phi_eps",    "u2_v_alpha",     "u_v_alpha",      "grad_v4_v3",
      "grad_v4_valpha", "grad_v2_valpha", "grad_ln_v2",    "dirichlet_v",    "log_inv_v",
      "flux",           "grad_u_v2",     "vt2",            "lap_v2",         "dt"};
  return names;
}

/// Previously recorded v, for the time-difference proxy of int v_t^2.
struct PreviousRecord {
  double t;
  Field v;
};

/// Evaluates every channel on one state; values follow channel_names().
inline std::vector<double> evaluate_channels(const SimState& s, const SimParams& p, double ubar0, double dt,
                                         const std::optional<PreviousRecord>& prev = std::nullopt) {
  const Field& u = s.u;
  const Field& v = s.v;
  const Grid& g = u.grid();
  const RegularizedMotility law = p.law();
  const RegularizedMotility bare(p.motility, 0.0);
  const double alpha = p.motility.alpha;
  const double vol = g.cell_volume();
  double mass = 0.0, int_v = 0.0, u2phi = 0.0, u2va = 0.0, uva = 0.0, uphi = 0.0, lninv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mass += u[i];
    int_v += v[i];
    const double va = std::pow(v[i], alpha);
    u2phi += u[i] * u[i] * law.value(v[i]);
    u2va += u[i] * u[i] * va;
    uva += u[i] * va;
    uphi += u[i] * bare.value(v[i]);
    lninv -= std::log(v[i]);
  }
  const Field lap = laplacian_apply(g, v);
  double lap2 = 0.0;
  for (double x : lap.values()) lap2 += x * x;
  double vt2 = 0.0;
  if (prev && s.t > prev->t) {
    const double tau = s.t - prev->t;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double d = (v[i] - prev->v[i]) / tau;
      vt2 += d * d;
    }
  }
  const Field uv2 = zip(u, v, [](double a, double b) { return a * b * b; });
  const double a = alpha < 1.0 ? 1.0 / alpha : 1.0;
  return {mass * vol,
          int_v * vol,
          v.max(),
          v.min(),
          u.min(),
          s.absorbed,
          1.0 + p.eps * s.t + s.budget_integral,
          absorption_rate(u, v, p.eps),
          budget_density(u, v, p.eps),
          log_entropy(u),
          fisher_dissipation(u, v, law),
          entropy_cross_term(u, v, law),
          quasi_energy(u, v, law, {a}),
          motility_moment(u, v, law),
          uphi * vol,
          duality_norm(u, ubar0),
          u2phi * vol,
          u2va * vol,
          uva * vol,
          weighted_gradient_integral(v, -3.0, 4.0),
          weighted_gradient_integral(v, alpha - 4.0, 4.0),
          weighted_gradient_integral(v, alpha - 2.0, 2.0),
          weighted_gradient_integral(v, -2.0, 2.0),
          weighted_gradient_integral(v, 0.0, 2.0),
          lninv * vol,
          flux_norm(u, v, law, flux_exponent(alpha)),
          face_gradient_power_integral(uv2, 1.0, [](std::size_t, std::size_t) { return 1.0; }),
          vt2 * vol,
          lap2 * vol,
          dt};
}

}  // namespace dmsim
