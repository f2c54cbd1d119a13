#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "dmsim/config.hpp"
#include "dmsim/persist.hpp"
#include "dmsim/run.hpp"

using namespace dmsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("dmsim_io_" + name);
  fs::remove_all(p);
  return p;
}

KeyValues parse(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

RunConfig small_config() {
  RunConfig c;
  c.grid = {1, 1.0, 1.0, 16, 16};
  c.motility = {"prototype", 0.5, 1.0};
  c.eps = 0.1;
  c.init_u.kind = "gaussian";
  c.init_u.base = 0.2;
  c.init_u.amp = 2.0;
  c.init_u.sigma = 0.1;
  c.init_v.kind = "cosine";
  c.dt = 0.01;
  c.t_end = 0.05;
  c.record_every = 2;
  return c;
}

}  // namespace

TEST(KeyValueText, CommentsWhitespaceAndErrors) {
  const auto kv = parse("# header\n  eps = 0.25   # trailing\n\ngrid.nx=8\n");
  EXPECT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("eps"), "0.25");
  EXPECT_EQ(kv.at("grid.nx"), "8");
  EXPECT_THROW(parse("eps = 1\neps = 2\n"), ConfigError);
  EXPECT_THROW(parse("just words\n"), ConfigError);
  EXPECT_THROW(parse(" = 3\n"), ConfigError);
}

TEST(Config, UnknownKeysAndMalformedValuesAreRejected) {
  EXPECT_THROW(config_from_keys(parse("epsilon = 0.1\n")), ConfigError);
  EXPECT_THROW(config_from_keys(parse("eps = 0.1x\n")), ConfigError);
  EXPECT_THROW(config_from_keys(parse("grid.nx = 8.5\n")), ConfigError);
  EXPECT_THROW(config_from_keys(parse("grid.dim = 3\n")), ConfigError);
  EXPECT_THROW(config_from_keys(parse("record.snapshots = maybe\n")), ConfigError);
  EXPECT_NO_THROW(config_from_keys(parse("plan.axis = eps\n"), "plan."));
  EXPECT_THROW(load_config("/nonexistent/dir/run.cfg"), ConfigError);
}

TEST(Config, ValidationCatchesInconsistentSettings) {
  RunConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.eps = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);  // alpha < 1 needs eps > 0
  c = small_config();
  c.dt_policy = "sometimes";
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.grid.nx = 1;
  EXPECT_THROW(c.validate(), ContractError);
  c = small_config();
  c.motility.form = "mystery";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, EchoRoundTripsExactly) {
  RunConfig c = small_config();
  c.grid = {2, 0.7, 1.0 / 3.0, 12, 9};
  c.eps = 1e-3 / 7.0;
  c.motility = {"saturating", 0.3, 0.1};
  c.init_u.kind = "random";
  c.init_u.seed = 123456789;
  c.dt_policy = "adaptive";
  c.dt_cap = 0.1 / 3.0;
  c.keep_snapshots = false;
  c.output_dir = "out/somewhere";
  c.threads = 3;
  c.audit_margin = 0.05;
  const RunConfig back = config_from_keys(parse(echo_config(c)));
  EXPECT_EQ(back, c);
  EXPECT_EQ(echo_config(back), echo_config(c));
}

TEST(InitialPresets, SampledOnCellCentres) {
  RunConfig c = small_config();
  const InitialData d = make_initial_data(c);
  const Grid g = c.grid.make();
  for (int i = 0; i < 16; ++i) {
    const double x = g.center(0, i);
    EXPECT_DOUBLE_EQ(d.u0[i], 0.2 + 2.0 * std::exp(-(x - 0.5) * (x - 0.5) / 0.02));
    EXPECT_DOUBLE_EQ(d.v0[i], 1.0 + 0.5 * std::cos(M_PI * x));
  }
  c.init_v.kind = "constant";
  c.init_v.value = 0.0;
  try {
    make_initial_data(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("strictly positive"), std::string::npos);
  }
  c = small_config();
  c.init_u.kind = "file";
  EXPECT_THROW(make_initial_data(c), ConfigError);
}

TEST(Snapshot, ByteLayoutFixture) {
  const Grid g = Grid::line(1.0, 2);
  const auto bytes = encode_snapshot(Field(g, {1.0, 0.5}), Field(g, {2.0, 0.25}));
  const std::vector<unsigned char> expect = {
      'D', 'M', 'S', '1', 1, 0, 0, 0, 2, 0, 0, 0,           //
      0, 0, 0, 0, 0, 0, 0xF0, 0x3F, 0, 0, 0, 0, 0, 0, 0xE0, 0x3F,  // u
      0, 0, 0, 0, 0, 0, 0x00, 0x40, 0, 0, 0, 0, 0, 0, 0xD0, 0x3F,  // v
  };
  EXPECT_EQ(bytes, expect);
  const SnapshotData s = decode_snapshot(bytes);
  EXPECT_EQ(s.dim, 1);
  EXPECT_EQ(s.counts[0], 2);
  EXPECT_EQ(s.u, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(s.v, (std::vector<double>{2.0, 0.25}));
}

TEST(Snapshot, RejectsCorruptInput) {
  const Grid g = Grid::rect(1.0, 3, 1.0, 2);
  auto bytes = encode_snapshot(Field(g, 1.0), Field(g, 2.0));
  EXPECT_EQ(bytes.size(), 4u + 4u + 8u + 16u * 6u);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_snapshot(bad), ConfigError);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(decode_snapshot(bad), ConfigError);
  bad = bytes;
  bad[4] = 3;
  EXPECT_THROW(decode_snapshot(bad), ConfigError);
  EXPECT_THROW(snapshot_fields(decode_snapshot(bytes), Grid::rect(1.0, 2, 1.0, 3)), ConfigError);
}

TEST(Snapshot, FileRoundTripIsBitwise) {
  const fs::path dir = scratch("snap");
  fs::create_directories(dir);
  const Grid g = Grid::rect(1.0, 5, 2.0, 3);
  const Field u = Field::sample(g, [](double x, double y) { return std::exp(x) / 3.0 + y * 1e-300; });
  const Field v = Field::sample(g, [](double x, double y) { return 1.0 / (7.0 + x * y); });
  write_snapshot(dir / "a.fld", u, v);
  const auto [u2, v2] = snapshot_fields(read_snapshot(dir / "a.fld"), g);
  EXPECT_EQ(u2, u);
  EXPECT_EQ(v2, v);
  EXPECT_THROW(read_snapshot(dir / "missing.fld"), ConfigError);
}

TEST(SeriesCsv, RoundTripIsBitwise) {
  FunctionalSeries s({"a", "b"}, SeriesMeta{0.1, 0.5, "1D 4 cells", 0.01});
  s.append(0.0, {1.0 / 3.0, -2.5e-300});
  s.append(0.1, {M_PI, 1e300});
  s.append(0.30000000000000004, {-0.0, 6.02214076e23});
  std::istringstream in(series_csv(s));
  const FunctionalSeries back = parse_series_csv(in, s.meta());
  EXPECT_EQ(back, s);
  std::istringstream bad("t,a\n0,1,2\n");
  EXPECT_THROW(parse_series_csv(bad), ConfigError);
  std::istringstream no_header("x,a\n");
  EXPECT_THROW(parse_series_csv(no_header), ConfigError);
}

TEST(Series, RejectsNonIncreasingTimesAndWrongWidth) {
  FunctionalSeries s({"a"});
  s.append(0.0, {1.0});
  EXPECT_THROW(s.append(0.0, {1.0}), ContractError);
  EXPECT_THROW(s.append(1.0, {1.0, 2.0}), ContractError);
  EXPECT_THROW(s.channel("b"), ContractError);
}

TEST(RunDir, WriteThenLoadReproducesTheRecord) {
  const RunRecord rec = run(small_config());
  ASSERT_TRUE(rec.complete);
  EXPECT_EQ(rec.steps, 5);
  EXPECT_EQ(rec.series.times(), (std::vector<double>{0.0, 0.02, 0.04, 0.05}));
  const fs::path dir = scratch("rundir");
  write_run_dir(dir, rec);
  for (const char* f : {"config.echo", "series.csv", "meta.txt", "snapshots/index.csv", "snapshots/000000.fld"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const RunRecord back = load_run_dir(dir);
  EXPECT_EQ(back.config, rec.config);
  EXPECT_EQ(back.series, rec.series);
  EXPECT_EQ(back.snapshots, rec.snapshots);
  EXPECT_EQ(back.steps, rec.steps);
  EXPECT_TRUE(back.complete);
  EXPECT_EQ(back.version, kVersion);
  EXPECT_THROW(load_run_dir(dir / "nope"), ConfigError);
}

TEST(RunDir, SnapshotsCanStartARun) {
  RunConfig c = small_config();
  const RunRecord rec = run(c);
  const fs::path dir = scratch("restart");
  write_run_dir(dir, rec);
  c.init_u.kind = "file";
  c.init_v.kind = "file";
  c.init_file = (dir / "snapshots" / snapshot_filename(rec.last().index)).string();
  const InitialData d = make_initial_data(c);
  EXPECT_EQ(d.u0, rec.last().u);
  EXPECT_EQ(d.v0, rec.last().v);
}

TEST(Run, RecordsInvariantsAndFinalTime) {
  RunConfig c = small_config();
  c.t_end = 0.055;  // last step shortened
  c.keep_snapshots = false;
  const RunRecord rec = run(c);
  ASSERT_TRUE(rec.complete);
  EXPECT_EQ(rec.series.times().back(), 0.055);
  EXPECT_EQ(rec.snapshots.size(), 2u);
  EXPECT_EQ(rec.last().t, 0.055);
  const auto& mass = rec.series.channel("mass");
  for (double m : mass) EXPECT_NEAR(m, mass[0], 1e-12 * mass[0]);
  const auto& iv = rec.series.channel("int_v");
  const auto& ab = rec.series.channel("absorbed");
  for (std::size_t k = 0; k < iv.size(); ++k) EXPECT_NEAR(iv[k] + ab[k], iv[0], 1e-12 * iv[0]);
}
