#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dmsim/error.hpp"
#include "dmsim/grid.hpp"

namespace dmsim {

struct SolverOptions {
  double rel_tol = 1e-10;
  long max_iter_factor = 50;  ///< iteration cap is max_iter_factor * cell count
  bool force_iterative = false;  ///< skip the 1D direct path
};

struct SolveStats {
  long iterations = 0;
  double residual = 0.0;  ///< final relative residual ||b - Ax|| / ||b||
  bool direct = false;
};

namespace detail {

inline double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// y = (diag - dt L) x
inline void apply_shifted(const Grid& g, std::span<const double> diag, double dt,
                          std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = diag[i] * x[i];
  for_each_neighbour(g, [&](std::size_t c, std::size_t nb, double ih2) {
    y[c] -= dt * (x[nb] - x[c]) * ih2;
  });
}

inline std::vector<double> shifted_diagonal(const Grid& g, std::span<const double> diag, double dt) {
  std::vector<double> m(diag.begin(), diag.end());
  for_each_neighbour(g, [&](std::size_t c, std::size_t, double ih2) { m[c] += dt * ih2; });
  return m;
}

inline double relative_residual(const Grid& g, std::span<const double> diag, double dt,
                                std::span<const double> x, std::span<const double> b) {
  std::vector<double> ax(x.size());
  apply_shifted(g, diag, dt, x, ax);
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r += (b[i] - ax[i]) * (b[i] - ax[i]);
  const double nb = norm2(b);
  return nb == 0.0 ? std::sqrt(r) : std::sqrt(r) / nb;
}

// Symmetric Gauss-Seidel sweep. For an M-matrix with b >= 0 and x >= 0 every
// update is a sum of nonnegative terms, so the sweep keeps x >= 0.
inline void symmetric_gauss_seidel(const Grid& g, std::span<const double> diag, double dt,
                                   std::span<const double> b, std::span<double> x) {
  const std::vector<double> m = shifted_diagonal(g, diag, dt);
  const int nx = g.cells(0);
  const int ny = g.dim() == 1 ? 1 : g.cells(1);
  const double ihx2 = 1.0 / (g.spacing(0) * g.spacing(0));
  const double ihy2 = g.dim() == 1 ? 0.0 : 1.0 / (g.spacing(1) * g.spacing(1));
  auto relax = [&](int i, int j) {
    const std::size_t c = g.index(i, j);
    double s = b[c];
    if (i > 0) s += dt * ihx2 * x[g.index(i - 1, j)];
    if (i + 1 < nx) s += dt * ihx2 * x[g.index(i + 1, j)];
    if (j > 0) s += dt * ihy2 * x[g.index(i, j - 1)];
    if (j + 1 < ny) s += dt * ihy2 * x[g.index(i, j + 1)];
    x[c] = s / m[c];
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) relax(i, j);
  for (int j = ny - 1; j >= 0; --j)
    for (int i = nx - 1; i >= 0; --i) relax(i, j);
}

inline void check_spd_inputs(const Grid& g, const Field& diag, double dt, const Field& rhs) {
  require_on_grid(g, diag);
  require_on_grid(g, rhs);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("solve_spd: dt must be positive");
  for (double d : diag.values())
    if (!(d > 0.0) || !std::isfinite(d))
      throw DomainError("solve_spd: diagonal must be finite and strictly positive");
}

}  // namespace detail

/// Thomas algorithm for the 1D tridiagonal system (diag - dt L) x = rhs.
/// The matrix is a diagonally dominant M-matrix, so elimination needs no
/// pivoting and a nonnegative rhs yields a nonnegative x entrywise.
inline Field solve_tridiagonal(const Grid& g, const Field& diag, double dt, const Field& rhs,
                               SolveStats* stats = nullptr) {
  detail::check_spd_inputs(g, diag, dt, rhs);
  if (g.dim() != 1) throw ContractError("solve_tridiagonal: 1D grids only");
  const int n = g.cells(0);
  const double off = dt / (g.spacing(0) * g.spacing(0));
  std::vector<double> cp(n), dp(n);
  for (int i = 0; i < n; ++i) {
    const int nb = (i > 0) + (i + 1 < n);
    const double b = diag[i] + off * nb;
    const double a = i > 0 ? -off : 0.0;
    const double c = i + 1 < n ? -off : 0.0;
    const double denom = b - (i > 0 ? a * cp[i - 1] : 0.0);
    cp[i] = c / denom;
    dp[i] = (rhs[i] - (i > 0 ? a * dp[i - 1] : 0.0)) / denom;
  }
  Field x(g, 0.0);
  x[n - 1] = dp[n - 1];
  for (int i = n - 2; i >= 0; --i) x[i] = dp[i] - cp[i] * x[i + 1];
  if (stats) {
    stats->iterations = 0;
    stats->direct = true;
    stats->residual = detail::relative_residual(g, diag.values(), dt, x.values(), rhs.values());
  }
  return x;
}

/// Jacobi-preconditioned conjugate gradients for (diag - dt L) x = rhs.
/// When rhs >= 0 the iterate is made sign-preserving at the end: entries
/// pushed below zero by the residual are clamped and a symmetric
/// Gauss-Seidel sweep restores the residual.
inline Field solve_spd_cg(const Grid& g, const Field& diag, double dt, const Field& rhs,
                          const SolverOptions& opt = {}, SolveStats* stats = nullptr) {
  detail::check_spd_inputs(g, diag, dt, rhs);
  const std::size_t n = g.size();
  const std::vector<double> m = detail::shifted_diagonal(g, diag.values(), dt);
  const double bnorm = detail::norm2(rhs.values());
  Field x(g, 0.0);
  if (bnorm == 0.0) {
    if (stats) *stats = {0, 0.0, false};
    return x;
  }
  // Diagonal scaling gives a good start for strongly diagonal systems.
  for (std::size_t i = 0; i < n; ++i) x[i] = rhs[i] / m[i];
  std::vector<double> r(n), z(n), p(n), ap(n);
  detail::apply_shifted(g, diag.values(), dt, x.values(), ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / m[i];
  p = z;
  double rz = detail::dot(r, z);
  const long cap = opt.max_iter_factor * static_cast<long>(n);
  long it = 0;
  double rel = detail::norm2(r) / bnorm;
  while (rel > opt.rel_tol && it < cap) {
    detail::apply_shifted(g, diag.values(), dt, p, ap);
    const double alpha = rz / detail::dot(p, ap);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    ++it;
    rel = detail::norm2(r) / bnorm;
    if (rel <= opt.rel_tol) break;
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / m[i];
    const double rz_new = detail::dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  if (rel > opt.rel_tol)
    throw SolverError("solve_spd: no convergence, relative residual " + std::to_string(rel), rel, it);

  bool nonneg_rhs = true;
  for (double b : rhs.values()) nonneg_rhs = nonneg_rhs && b >= 0.0;
  if (nonneg_rhs && x.min() < 0.0) {
    for (auto& xi : x.values()) xi = std::max(xi, 0.0);
    for (int sweep = 0; sweep < 4; ++sweep) {
      detail::symmetric_gauss_seidel(g, diag.values(), dt, rhs.values(), x.values());
      rel = detail::relative_residual(g, diag.values(), dt, x.values(), rhs.values());
      if (rel <= opt.rel_tol) break;
    }
  }
  if (stats) *stats = {it, rel, false};
  return x;
}

/// Solves (diag(diag) - dt L) x = rhs. 1D grids use the exact tridiagonal
/// elimination; 2D grids use preconditioned CG to the requested tolerance.
inline Field solve_spd(const Grid& g, const Field& diag, double dt, const Field& rhs,
                       const SolverOptions& opt = {}, SolveStats* stats = nullptr) {
  if (g.dim() == 1 && !opt.force_iterative) return solve_tridiagonal(g, diag, dt, rhs, stats);
  return solve_spd_cg(g, diag, dt, rhs, opt, stats);
}

namespace detail {

inline void project_mean_free(std::span<double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  s /= static_cast<double>(x.size());
  for (auto& v : x) v -= s;
}

inline void check_mean_free(const Field& rhs) {
  double s = 0.0, a = 0.0;
  for (double v : rhs.values()) {
    s += v;
    a += std::abs(v);
  }
  if (std::abs(s) > 1e-12 * a)
    throw DomainError("solve_neumann_poisson_zero_mean: right-hand side has nonzero mean");
}

// 1D: the face fluxes follow from a running sum of the source.
inline Field neumann_poisson_1d(const Grid& g, const Field& rhs) {
  const int n = g.cells(0);
  const double h = g.spacing(0);
  Field psi(g, 0.0);
  double flux = 0.0;  // (psi_{i+1} - psi_i)/h on face i+1/2
  for (int i = 0; i + 1 < n; ++i) {
    flux -= h * rhs[i];
    psi[i + 1] = psi[i] + h * flux;
  }
  project_mean_free(psi.values());
  return psi;
}

}  // namespace detail

/// Returns psi with -L psi = rhs and zero mean (the discrete inverse of the
/// Neumann operator -Laplacian on mean-free data).
inline Field solve_neumann_poisson_zero_mean(const Grid& g, const Field& rhs, const SolverOptions& opt = {},
                                             SolveStats* stats = nullptr) {
  require_on_grid(g, rhs);
  detail::check_mean_free(rhs);
  if (g.dim() == 1 && !opt.force_iterative) {
    Field psi = detail::neumann_poisson_1d(g, rhs);
    if (stats) *stats = {0, 0.0, true};
    return psi;
  }
  // Projected PCG on -L; the projection removes the constant kernel.
  const std::size_t n = g.size();
  std::vector<double> m(n, 0.0);
  for_each_neighbour(g, [&](std::size_t c, std::size_t, double ih2) { m[c] += ih2; });
  std::vector<double> b(rhs.values().begin(), rhs.values().end());
  detail::project_mean_free(b);
  const double bnorm = detail::norm2(b);
  Field x(g, 0.0);
  if (bnorm == 0.0) {
    if (stats) *stats = {0, 0.0, false};
    return x;
  }
  const std::vector<double> zero_diag(n, 0.0);
  std::vector<double> r = b, z(n), p(n), ap(n);
  auto precondition = [&] {
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / m[i];
    detail::project_mean_free(z);
  };
  precondition();
  p = z;
  double rz = detail::dot(r, z);
  const long cap = opt.max_iter_factor * static_cast<long>(n);
  long it = 0;
  double rel = 1.0;
  while (it < cap) {
    detail::apply_shifted(g, zero_diag, 1.0, p, ap);  // ap = -L p
    const double alpha = rz / detail::dot(p, ap);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    detail::project_mean_free(x.values());
    detail::project_mean_free(r);
    ++it;
    rel = detail::norm2(r) / bnorm;
    if (rel <= opt.rel_tol) break;
    precondition();
    const double rz_new = detail::dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  if (rel > opt.rel_tol)
    throw SolverError("solve_neumann_poisson_zero_mean: no convergence, relative residual " +
                          std::to_string(rel),
                      rel, it);
  if (stats) *stats = {it, rel, false};
  return x;
}

}  // namespace dmsim
