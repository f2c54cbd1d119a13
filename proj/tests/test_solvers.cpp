#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "dmsim/solvers.hpp"

using namespace dmsim;

namespace {

using Dense = std::vector<std::vector<double>>;

// Dense (diag - dt L) assembled straight from the 3/5-point stencil.
Dense assemble(const Grid& g, const std::vector<double>& diag, double dt) {
  const std::size_t n = g.size();
  Dense a(n, std::vector<double>(n, 0.0));
  const int nx = g.cells(0), ny = g.dim() == 1 ? 1 : g.cells(1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = g.index(i, j);
      a[c][c] += diag[c];
      auto link = [&](int ii, int jj, double h) {
        const std::size_t nb = g.index(ii, jj);
        a[c][c] += dt / (h * h);
        a[c][nb] -= dt / (h * h);
      };
      if (i > 0) link(i - 1, j, g.spacing(0));
      if (i + 1 < nx) link(i + 1, j, g.spacing(0));
      if (g.dim() == 2 && j > 0) link(i, j - 1, g.spacing(1));
      if (g.dim() == 2 && j + 1 < ny) link(i, j + 1, g.spacing(1));
    }
  return a;
}

// Gaussian elimination with partial pivoting.
std::vector<double> gauss(Dense a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    std::swap(a[k], a[p]);
    std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a[k][j] * x[j];
    x[k] = s / a[k][k];
  }
  return x;
}

Field random_field(const Grid& g, double lo, double hi, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Field f(g, 0.0);
  for (auto& x : f.values()) x = d(rng);
  return f;
}

}  // namespace

TEST(ShiftedSolve, MatchesDenseEliminationIn1D) {
  const Grid g = Grid::line(1.0, 4);
  const Field diag(g, 1.0 / 1.5);
  const Field rhs(g, {1.0, 0.0, 0.0, 1.0});
  const auto ref = gauss(assemble(g, {diag.values().begin(), diag.values().end()}, 0.1), {1, 0, 0, 1});
  SolveStats st;
  const Field x = solve_spd(g, diag, 0.1, rhs, {}, &st);
  EXPECT_TRUE(st.direct);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(x[i], ref[i], 1e-13);
  SolverOptions it;
  it.force_iterative = true;
  const Field y = solve_spd(g, diag, 0.1, rhs, it, &st);
  EXPECT_FALSE(st.direct);
  EXPECT_LE(st.residual, 1e-10);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], ref[i], 1e-9);
}

TEST(ShiftedSolve, MatchesDenseEliminationIn2DWithVariableDiagonal) {
  const Grid g = Grid::rect(1.0, 6, 2.0, 5);
  const Field diag = random_field(g, 0.5, 3.0, 3);
  const Field rhs = random_field(g, -1.0, 1.0, 4);
  const auto ref =
      gauss(assemble(g, {diag.values().begin(), diag.values().end()}, 0.05), {rhs.values().begin(), rhs.values().end()});
  SolveStats st;
  const Field x = solve_spd(g, diag, 0.05, rhs, {}, &st);
  EXPECT_GT(st.iterations, 0);
  EXPECT_LE(st.residual, 1e-10);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(x[i], ref[i], 1e-8);
}

TEST(ShiftedSolve, NonnegativeDataGiveNonnegativeSolutions) {
  for (const Grid& g : {Grid::line(1.0, 200), Grid::rect(1.0, 24, 1.0, 24)}) {
    for (unsigned seed = 0; seed < 5; ++seed) {
      Field rhs = random_field(g, 0.0, 1.0, seed);
      for (std::size_t i = 0; i < rhs.size(); i += 3) rhs[i] = 0.0;
      const Field diag = random_field(g, 1e-3, 2.0, seed + 100);
      const Field x = solve_spd(g, diag, 0.5, rhs);
      EXPECT_GE(x.min(), 0.0);
    }
  }
}

TEST(ShiftedSolve, RejectsInvalidInputs) {
  const Grid g = Grid::line(1.0, 4);
  EXPECT_THROW(solve_spd(g, Field(g, 1.0), 0.0, Field(g, 1.0)), DomainError);
  EXPECT_THROW(solve_spd(g, Field(g, 0.0), 0.1, Field(g, 1.0)), DomainError);
  EXPECT_THROW(solve_spd(g, Field(Grid::line(1.0, 5), 1.0), 0.1, Field(g, 1.0)), ContractError);
}

TEST(ShiftedSolve, IterationCapRaisesSolverError) {
  const Grid g = Grid::rect(1.0, 32, 1.0, 32);
  SolverOptions opt;
  opt.max_iter_factor = 0;  // cap of zero iterations
  opt.rel_tol = 1e-14;
  try {
    solve_spd(g, Field(g, 1.0), 1.0, random_field(g, 0.0, 1.0, 9), opt);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GT(e.residual(), 1e-14);
  }
}

TEST(NeumannPoisson, CosineSourceHasClosedFormSolution) {
  // -psi'' = cos(pi x) with psi' = 0 at both ends and mean zero: psi = cos(pi x)/pi^2.
  std::vector<double> err;
  for (int n : {32, 64, 128}) {
    const Grid g = Grid::line(1.0, n);
    const Field f = Field::sample(g, [](double x, double) { return std::cos(M_PI * x); });
    Field rhs = f;
    detail::project_mean_free(rhs.values());
    const Field psi = solve_neumann_poisson_zero_mean(g, rhs);
    double e = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) e = std::max(e, std::abs(psi[i] - f[i] / (M_PI * M_PI)));
    err.push_back(e);
    SolverOptions it;
    it.force_iterative = true;
    const Field psi2 = solve_neumann_poisson_zero_mean(g, rhs, it);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(psi2[i], psi[i], 1e-8);
  }
  EXPECT_LT(err.back(), 1e-4);
  for (std::size_t k = 1; k < err.size(); ++k) EXPECT_GE(std::log2(err[k - 1] / err[k]), 1.9);
}

TEST(NeumannPoisson, InvertsTheStencilIn2D) {
  const Grid g = Grid::rect(2.0, 12, 1.0, 10);
  Field rhs = random_field(g, -1.0, 1.0, 11);
  detail::project_mean_free(rhs.values());
  const Field psi = solve_neumann_poisson_zero_mean(g, rhs);
  const Field back = laplacian_apply(g, psi);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(-back[i], rhs[i], 1e-8);
  double mean = 0.0;
  for (double x : psi.values()) mean += x;
  EXPECT_NEAR(mean, 0.0, 1e-10);
}

TEST(NeumannPoisson, RejectsNonzeroMean) {
  const Grid g = Grid::line(1.0, 8);
  EXPECT_THROW(solve_neumann_poisson_zero_mean(g, Field(g, 1.0)), DomainError);
  const Field zero = solve_neumann_poisson_zero_mean(g, Field(g, 0.0));
  for (double x : zero.values()) EXPECT_EQ(x, 0.0);
}
