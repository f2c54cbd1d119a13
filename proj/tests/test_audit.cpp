#include <cmath>

#include <gtest/gtest.h>

#include "dmsim/audit.hpp"
#include "dmsim/run.hpp"

using namespace dmsim;

namespace {

RunConfig homogeneous_config() {
  RunConfig c;
  c.grid = {1, 1.0, 1.0, 16, 16};
  c.motility = {"prototype", 0.5, 1.0};
  c.eps = 0.1;
  c.init_u = {};
  c.init_u.kind = "constant";
  c.init_u.value = 1.5;
  c.init_v.kind = "constant";
  c.init_v.value = 2.0;
  c.dt = 0.01;
  c.t_end = 0.5;
  return c;
}

// Smooth nonconstant data; cheap enough for three co-refined levels.
RunConfig generic_config() {
  RunConfig c;
  c.grid = {1, 1.0, 1.0, 32, 32};
  c.motility = {"prototype", 0.5, 1.0};
  c.eps = 0.1;
  c.init_u.kind = "cosine";
  c.init_u.base = 1.0;
  c.init_u.amp = 0.5;
  c.init_v.kind = "cosine";
  c.init_v.mean = 1.0;
  c.init_v.amp = 0.5;
  c.dt = 1e-3;
  c.t_end = 0.1;
  c.record_every = 1;
  return c;
}

struct Ladder {
  std::vector<RunRecord> runs;
  std::vector<const RunRecord*> ptrs() const {
    std::vector<const RunRecord*> p;
    for (const auto& r : runs) p.push_back(&r);
    return p;
  }
};

const Ladder& generic_ladder() {
  static const Ladder l = [] {
    Ladder out;
    for (const auto& c : co_refined_ladder(generic_config(), 3)) out.runs.push_back(run(c));
    return out;
  }();
  return l;
}

}  // namespace

TEST(OrderVerdict, SlopesFloorsAndSingleLevels) {
  AuditOptions opt;
  AuditReport r;
  detail::order_verdict(r, {1.0, 0.5, 0.25}, {10.0, 10.0, 10.0}, opt);
  EXPECT_EQ(r.verdict, AuditVerdict::order_confirmed);
  EXPECT_NEAR(r.get("least_squares_order"), 1.0, 1e-12);
  AuditReport flat;
  detail::order_verdict(flat, {1.0, 1.0, 1.0}, {10.0, 10.0, 10.0}, opt);
  EXPECT_EQ(flat.verdict, AuditVerdict::fail);
  EXPECT_FALSE(flat.witness.empty());
  AuditReport wild;
  detail::order_verdict(wild, {1.0, 1e-3}, {10.0, 10.0}, opt);
  EXPECT_EQ(wild.verdict, AuditVerdict::fail);  // order ~10 is not one consistent family
  AuditReport tiny;
  detail::order_verdict(tiny, {1e-15, 2e-15}, {1.0, 1.0}, opt);
  EXPECT_EQ(tiny.verdict, AuditVerdict::pass);
  AuditReport single;
  detail::order_verdict(single, {1e-3}, {1.0}, opt);
  EXPECT_EQ(single.verdict, AuditVerdict::inconclusive);
}

TEST(Ladder, CoRefinementDoublesCellsAndHalvesSteps) {
  RunConfig c = generic_config();
  c.grid = {2, 1.0, 2.0, 8, 6};
  const auto l = co_refined_ladder(c, 3);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[2].grid.nx, 32);
  EXPECT_EQ(l[2].grid.ny, 24);
  EXPECT_DOUBLE_EQ(l[2].dt, c.dt / 4);
  EXPECT_EQ(l[2].record_every, c.record_every);
  EXPECT_THROW(co_refined_ladder(c, 0), ContractError);
}

TEST(HomogeneousRun, EveryApplicableAuditPasses) {
  const RunRecord rec = run(homogeneous_config());
  ASSERT_TRUE(rec.complete);
  const auto reports = audit_run(rec, {&rec});
  // the weak-form residual carries time-quadrature error, so one level cannot decide it
  for (const auto& r : reports) {
    if (r.name == "weak_solution") continue;
    EXPECT_TRUE(is_success(r.verdict) || r.verdict == AuditVerdict::skipped) << r.name;
  }
  const auto dual = audit_identity_duality({&rec});
  EXPECT_EQ(dual.verdict, AuditVerdict::pass);
  EXPECT_LE(dual.get("residual_L1_level0"), 1e-8);
  EXPECT_EQ(audit_identity_entropy({&rec}).verdict, AuditVerdict::pass);
  EXPECT_EQ(audit_quasi_energy(rec).verdict, AuditVerdict::pass);
}

TEST(Conservation, PassesOnRealRunAndFailsOnCorruptedRecords) {
  const RunRecord rec = generic_ladder().runs[0];
  EXPECT_EQ(audit_conservation(rec).verdict, AuditVerdict::pass);

  RunRecord bad_mass = rec;
  bad_mass.series.channel("mass")[7] *= 1.0 + 1e-6;
  const auto r1 = audit_conservation(bad_mass);
  EXPECT_EQ(r1.verdict, AuditVerdict::fail);
  EXPECT_NE(r1.witness.find("record 7"), std::string::npos) << r1.witness;
  EXPECT_NE(r1.witness.find("mass"), std::string::npos);

  RunRecord bad_max = rec;
  bad_max.series.channel("max_v")[5] += 0.1;
  const auto r2 = audit_conservation(bad_max);
  EXPECT_EQ(r2.verdict, AuditVerdict::fail);
  EXPECT_NE(r2.witness.find("record 5"), std::string::npos) << r2.witness;

  RunRecord bad_absorbed = rec;
  bad_absorbed.series.channel("absorbed").back() = 10.0 * rec.series.at("int_v", 0);
  EXPECT_EQ(audit_conservation(bad_absorbed).verdict, AuditVerdict::fail);
}

TEST(Identities, GenericRunConfirmsFirstOrder) {
  const auto ladder = generic_ladder().ptrs();
  for (const auto& r : {audit_identity_duality(ladder), audit_identity_entropy(ladder)}) {
    EXPECT_EQ(r.verdict, AuditVerdict::order_confirmed) << r.name << " " << r.witness;
    ASSERT_EQ(r.slopes.size(), 2u);
    for (double s : r.slopes) EXPECT_NEAR(s, 1.0, 0.2) << r.name;
    EXPECT_EQ(r.residuals.size(), ladder[0]->series.size() - 1);
  }
}

TEST(Identities, SignFlippedDissipationFails) {
  Ladder corrupted = generic_ladder();
  for (auto& r : corrupted.runs)
    for (auto& x : r.series.channel("fisher")) x = -x;
  const auto rep = audit_identity_entropy(corrupted.ptrs());
  EXPECT_EQ(rep.verdict, AuditVerdict::fail);
  EXPECT_FALSE(rep.witness.empty());
  Ladder shifted = generic_ladder();
  for (auto& r : shifted.runs)
    for (auto& x : r.series.channel("u2_phi_eps")) x *= 1.01;
  EXPECT_EQ(audit_identity_duality(shifted.ptrs()).verdict, AuditVerdict::fail);
}

TEST(Identities, SingleLevelAboveRoundingIsInconclusive) {
  const RunRecord& r = generic_ladder().runs[0];
  EXPECT_EQ(audit_identity_entropy({&r}).verdict, AuditVerdict::inconclusive);
}

TEST(QuasiEnergy, GenericRunPassesAndInflatedEnergyGrowthFails) {
  const RunRecord& rec = generic_ladder().runs[0];
  const auto ok = audit_quasi_energy(rec);
  EXPECT_EQ(ok.verdict, AuditVerdict::pass) << ok.witness;
  EXPECT_GT(ok.get("c1"), 0.0);
  EXPECT_DOUBLE_EQ(ok.get("a"), 2.0);
  RunRecord bad = rec;
  auto& e = bad.series.channel("quasi_energy");
  for (std::size_t k = 0; k < e.size(); ++k) e[k] += 1e3 * bad.series.times()[k];
  EXPECT_EQ(audit_quasi_energy(bad).verdict, AuditVerdict::fail);
  RunRecord linear = rec;
  linear.config.motility.alpha = 1.0;
  EXPECT_EQ(audit_quasi_energy(linear).verdict, AuditVerdict::skipped);
}

TEST(QuasiEnergy, RoughDataPassesOnceTheBackwardDifferenceIsUsed) {
  // at t = 0 the dissipation of random data dwarfs its average over the first step
  RunConfig c = generic_config();
  c.grid.nx = 128;
  c.init_u = {};
  c.init_u.kind = "random";
  c.init_u.amp = 4.0;
  c.init_u.seed = 3;
  c.eps = 0.01;
  c.t_end = 0.05;
  const auto r = audit_quasi_energy(run(c));
  EXPECT_EQ(r.verdict, AuditVerdict::pass) << r.witness;
}

TEST(DerivativeConstant, PrototypeIsAlpha) {
  EXPECT_NEAR(derivative_power_constant(MotilitySpec::prototype(0.3), 2.0), 0.3, 1e-12);
}

TEST(UniformBounds, PlateauAndGrowthOnFabricatedSeries) {
  RunConfig c = homogeneous_config();
  c.motility.alpha = 1.5;
  c.t_end = 2.0;
  c.dt = 0.05;
  const RunRecord rec = run(c);
  ASSERT_TRUE(rec.complete);
  const auto ok = audit_uniform_bounds(rec);
  EXPECT_EQ(ok.verdict, AuditVerdict::pass) << ok.witness;

  RunRecord growing = rec;
  auto& h = growing.series.channel("entropy");
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = 1.0 + growing.series.times()[k];
  const auto g = audit_uniform_bounds(growing);
  EXPECT_EQ(g.verdict, AuditVerdict::fail);
  EXPECT_NE(g.witness.find("entropy"), std::string::npos);

  RunRecord steady_flux = rec;
  for (auto& x : steady_flux.series.channel("grad_v4_valpha")) x = 1.0;
  EXPECT_EQ(audit_uniform_bounds(steady_flux).verdict, AuditVerdict::fail);

  RunRecord budget = rec;
  budget.series.channel("budget_I").back() = 1e6;
  EXPECT_EQ(audit_uniform_bounds(budget).verdict, AuditVerdict::fail);

  RunRecord sub = rec;
  sub.config.motility.alpha = 0.5;
  EXPECT_EQ(audit_uniform_bounds(sub).verdict, AuditVerdict::skipped);
}

TEST(WeightedHessian, ConstantFieldIsExact) {
  const Grid g = Grid::rect(1.0, 8, 1.0, 8);
  const auto t = weighted_hessian_terms(Field(g, 3.0), 1.5);
  EXPECT_EQ(t.A, 0.0);
  EXPECT_EQ(t.G, 0.0);
  EXPECT_EQ(t.K, 0.0);
  EXPECT_EQ(t.identity_lhs, t.identity_rhs);
  const auto r = audit_weighted_hessian({Field(g, 3.0), Field(g.refined(2), 3.0)}, 1.5);
  EXPECT_EQ(r.verdict, AuditVerdict::pass);
}

TEST(WeightedHessian, SmoothFieldsConfirmSecondOrder) {
  for (double alpha : {1.0, 1.5, 2.0}) {
    const auto r = audit_weighted_hessian([](double x, double) { return 2.0 + std::cos(M_PI * x); },
                                          Grid::line(1.0, 16), 4, alpha);
    if (alpha == 2.0) {
      // g = w - 1 and the K terms vanish: the discrete identity is exact
      EXPECT_EQ(r.verdict, AuditVerdict::pass);
      continue;
    }
    EXPECT_EQ(r.verdict, AuditVerdict::order_confirmed) << alpha << " " << r.witness;
    for (double s : r.slopes) EXPECT_NEAR(s, 2.0, 0.3) << alpha;
  }
  const auto r2 = audit_weighted_hessian(
      [](double x, double y) { return 1.5 + 0.5 * std::cos(M_PI * x) * std::cos(M_PI * y); }, Grid::rect(1.0, 8, 1.0, 8),
      3, 1.25);
  EXPECT_TRUE(is_success(r2.verdict)) << r2.witness;
}

TEST(WeightedHessian, TermsMatchHandComputedIdentityAtAlphaTwo) {
  // alpha = 2: g = w - 1, so G = A and the identity reads -2A = -2A; K enters with factor 0.
  const Grid g = Grid::line(1.0, 20);
  const Field w = Field::sample(g, [](double x, double) { return 1.0 + x * x; });
  const auto t = weighted_hessian_terms(w, 2.0);
  EXPECT_NEAR(t.G, t.A, 1e-12 * t.A);
  EXPECT_NEAR(t.identity_lhs, t.identity_rhs, 1e-12 * t.scale);
  EXPECT_THROW(weighted_hessian_terms(w, 0.5), DomainError);
  EXPECT_THROW(weighted_hessian_terms(Field(g, 0.0), 1.5), DomainError);
}

TEST(WeakForm, GenericRunConfirmsConvergence) {
  const auto r = audit_weak_solution(generic_ladder().ptrs());
  EXPECT_EQ(r.verdict, AuditVerdict::order_confirmed) << r.witness;
  EXPECT_TRUE(r.has("u_limit_residual_level0"));
}

TEST(WeakForm, PerturbedFieldsFail) {
  Ladder bad = generic_ladder();
  for (auto& run : bad.runs)
    for (std::size_t k = 1; k < run.snapshots.size(); ++k)
      for (auto& x : run.snapshots[k].u.values()) x *= 1.05;
  EXPECT_EQ(audit_weak_solution(bad.ptrs()).verdict, AuditVerdict::fail);
  RunRecord thin = generic_ladder().runs[0];
  thin.snapshots.resize(1);
  EXPECT_EQ(audit_weak_solution({&thin}).verdict, AuditVerdict::inconclusive);
}

TEST(FluxIntegrability, SpreadDecidesTheVerdict) {
  RunRecord a = generic_ladder().runs[0];
  RunRecord b = a;
  EXPECT_EQ(audit_flux_integrability({&a, &b}).verdict, AuditVerdict::pass);
  for (auto& x : b.series.channel("flux")) x *= 20.0;
  const auto r = audit_flux_integrability({&a, &b});
  EXPECT_EQ(r.verdict, AuditVerdict::fail);
  EXPECT_NEAR(r.get("ratio_spread"), 20.0, 1e-9);
}

TEST(AuditRun, SkipsWeakFormWithoutSnapshots) {
  RunConfig c = generic_config();
  c.keep_snapshots = false;
  const RunRecord rec = run(c);
  const auto reports = audit_run(rec, {&rec});
  bool found = false;
  for (const auto& r : reports)
    if (r.name == "weak_solution") {
      found = true;
      EXPECT_EQ(r.verdict, AuditVerdict::skipped);
    }
  EXPECT_TRUE(found);
}

TEST(AuditRun, WeightedHessianUsesTheResampledPreset) {
  RunConfig c = generic_config();
  c.motility.alpha = 1.5;
  c.keep_snapshots = false;
  c.t_end = 0.02;
  const RunRecord rec = run(c);
  int seen = 0;
  for (const auto& r : audit_run(rec, {&rec}))
    if (r.name == "weighted_hessian") {
      ++seen;
      EXPECT_EQ(r.verdict, AuditVerdict::order_confirmed) << r.witness;
      for (double s : r.slopes) EXPECT_NEAR(s, 2.0, 0.3);
    }
  EXPECT_EQ(seen, 1);
  c.init_v.kind = "file";
  RunRecord from_file = rec;
  from_file.config = c;
  for (const auto& r : audit_run(from_file, {&from_file})) EXPECT_NE(r.name, "weighted_hessian");
}
