#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oscar/io.hpp"
#include "oscar/runner.hpp"

using namespace oscar;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("oscar_test_" + name);
  fs::create_directories(d);
  return d;
}

RunConfig short_config(std::size_t n = 4096) {
  RunConfig c;
  c.n_samples = n;
  c.params.kappa_s = 1e-3;
  c.seed = 17;
  return c;
}

}  // namespace

TEST(FlipCounter, Definition) {
  FlipCounter f;
  for (double r : {0.5, 0.6, 0.45, 0.55, 0.4}) f.update(r);  // jitter only
  EXPECT_EQ(f.count(), 0u);
  for (double r : {0.95, 0.7, 0.49}) f.update(r);
  EXPECT_EQ(f.count(), 1u);
  EXPECT_EQ(f.settled_count(), 0u);  // never went beyond 0.99/0.01
  for (double r : {0.3, 0.51, 0.2}) f.update(r);  // not re-armed
  EXPECT_EQ(f.count(), 1u);
  for (double r : {0.005, 0.6, 0.95, 0.2}) f.update(r);
  EXPECT_EQ(f.count(), 3u);
  EXPECT_EQ(f.settled_count(), 2u);
}

TEST(RunTrajectory, SameSeedGivesByteIdenticalCsv) {
  const auto dir = scratch("determinism");
  const auto c = short_config();
  write_trajectory_csv((dir / "a.csv").string(), run_trajectory(c).rows);
  write_trajectory_csv((dir / "b.csv").string(), run_trajectory(c).rows);
  auto c2 = c;
  c2.seed = 18;
  write_trajectory_csv((dir / "c.csv").string(), run_trajectory(c2).rows);
  const auto a = slurp(dir / "a.csv");
  EXPECT_EQ(a, slurp(dir / "b.csv"));
  EXPECT_NE(a, slurp(dir / "c.csv"));
  EXPECT_EQ(a.substr(0, a.find('\n')), "t,zbar,r_u,Z_u,Z_d,vZZ_u,vZZ_d,I_c,f_t,Amp_t");
}

TEST(RunTrajectory, CsvRoundTripIsLossless) {
  const auto dir = scratch("roundtrip");
  const auto rec = run_trajectory(short_config(512));
  write_trajectory_csv((dir / "t.csv").string(), rec.rows);
  const auto zbar = read_csv_column((dir / "t.csv").string(), "zbar");
  const auto amp = read_csv_column((dir / "t.csv").string(), "Amp_t");
  ASSERT_EQ(zbar.size(), rec.rows.size());
  for (std::size_t k = 0; k < zbar.size(); ++k) {
    EXPECT_EQ(zbar[k], rec.rows[k].zbar);
    EXPECT_EQ(amp[k], rec.rows[k].Amp_t);
  }
}

TEST(RunTrajectory, RowsAreOrderedAndFinite) {
  const auto rec = run_trajectory(short_config(2048));
  ASSERT_EQ(rec.rows.size(), 2048u);
  for (std::size_t k = 0; k < rec.rows.size(); ++k) {
    const auto& r = rec.rows[k];
    EXPECT_DOUBLE_EQ(r.t, (k + 1) * 0.02);
    for (double v : {r.t, r.zbar, r.r_u, r.Z_u, r.Z_d, r.vZZ_u, r.vZZ_d, r.I_c, r.f_t, r.Amp_t})
      ASSERT_TRUE(std::isfinite(v));
  }
  EXPECT_GE(rec.summary.min_uncertainty, 0.25 * (1.0 - 1e-9));
}

TEST(RunTrajectory, ForceIsHeldOverTheSampleInterval) {
  // feedback starts once window + delay samples are in
  const auto rec = run_trajectory(short_config(1024));
  for (std::size_t k = 0; k + 1 < 314 + 79; ++k) EXPECT_EQ(rec.rows[k].f_t, 0.0);
  EXPECT_NE(rec.rows[500].f_t, 0.0);
}

TEST(RunTrajectory, EnsembleIndependentOfThreadCount) {
  const auto c = short_config(1024);
  auto run = [&](std::size_t i) { return run_trajectory(c, i).rows.back().zbar; };
  const auto one = run_ensemble(6, run, 1);
  const auto many = run_ensemble(6, run, 4);
  EXPECT_EQ(one, many);
  EXPECT_NE(one[0], one[1]);
  EXPECT_EQ(one[3], run_trajectory(c, 3).rows.back().zbar);
}

TEST(RunTrajectory, UnitaryModeKeepsSpinWeight) {
  auto c = short_config(4096);
  c.mode = "unitary";
  c.ic.r_u0 = 0.25;
  const auto rec = run_trajectory(c);
  for (const auto& r : rec.rows) ASSERT_EQ(r.r_u, 0.25);
  EXPECT_EQ(rec.summary.flips, 0u);
}

TEST(RunTrajectory, NoSpinNoiseNoFlipsAfterLocalizing) {
  auto c = short_config(1 << 15);
  c.params.kappa_s = 0.0;
  const auto summaries =
      run_ensemble(16, [&](std::size_t i) { return run_trajectory(c, i).summary; });
  for (const auto& s : summaries) {
    EXPECT_EQ(s.settled_flips, 0u);
    EXPECT_GT(s.localized_fraction(), 0.5);
  }
}

TEST(RunTrajectory, PhotocurrentUsesTheSampleIncrement) {
  auto c = short_config(64);
  c.params.lambda_pc = 0.0;
  for (const auto& r : run_trajectory(c).rows) EXPECT_EQ(r.I_c, r.zbar);
}

TEST(Classification, SyntheticShiftedTone) {
  RunConfig c;
  const std::size_t n = std::size_t{1} << 19;
  const double shift = c.params.gamma_big / (2.0 * pi);
  std::vector<double> x(n);
  for (double sign : {1.0, -1.0}) {
    for (std::size_t k = 0; k < n; ++k) x[k] = 50.0 * std::cos(2.0 * pi * (carrier_frequency() + sign * shift) * k * 0.02);
    RunSummary s;
    s.samples = n;
    s.up_samples = sign > 0 ? n : 0;
    s.down_samples = sign > 0 ? 0 : n;
    const auto rep = classify_signal(c, x, s);
    EXPECT_EQ(rep.verdict, sign > 0 ? SpinVerdict::up : SpinVerdict::down);
    EXPECT_TRUE(rep.correct());
    EXPECT_LE(std::abs(rep.shift - sign * shift), rep.df);
    EXPECT_NEAR(rep.t_sampling, 10485.76, 1e-9);
  }
}

TEST(Compare, FreeOscillatorAgreesWithSme) {
  RunConfig c;
  c.mode = "compare";
  // no coupling, no feedback, no damping bath: a bare oscillator
  c.params.eta = 0.0;
  c.params.g_fb = 0.0;
  c.params.gamma_damp = 0.0;
  c.params.amp_set = 2.0;
  c.params = with_derived(c.params);
  c.ic = reference_initial_condition(c.params);
  c.noise = false;
  c.dim = 24;
  c.n_samples = static_cast<std::size_t>(std::round(20.0 * 2.0 * pi / c.params.dt));
  const auto rep = compare_gaussian_sme(c);
  EXPECT_LT(rep.zbar_max, 1e-4);
  EXPECT_LT(rep.r_u_max, 1e-12);
  EXPECT_LT(rep.sme_diagnostics.max_edge_population, 1e-6);
}

TEST(Compare, UnconditionedRunsAgree) {
  RunConfig c;
  c.mode = "compare";
  c.params.amp_set = 4.0;
  c.params.e_d = 1e-12;
  c.params.kappa_s = 1e-3;
  c.params = with_derived(c.params);
  c.ic = reference_initial_condition(c.params);
  c.dim = 24;
  c.n_samples = 1000;
  const auto rep = compare_gaussian_sme(c);
  EXPECT_LT(rep.r_u_max, 1e-3);
}

TEST(Compare, RefusesLargeAmplitude) {
  RunConfig c;
  c.mode = "compare";
  EXPECT_THROW(compare_gaussian_sme(c), ConfigError);
}

TEST(Sweep, TableShape) {
  RunConfig c;
  c.mode = "sweep";
  c.n_samples = 1 << 12;
  c.ensemble = 3;
  c.sweep = {1e-3, 1e-5};
  const auto t = kappa_sweep(c);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].kappa_s, 1e-3);
  EXPECT_EQ(t[1].runs, 3u);
  EXPECT_EQ(t[1].flips.size(), 3u);
  EXPECT_GE(t[0].success_rate, 0.0);
  EXPECT_LE(t[0].success_rate, 1.0);
  c.sweep.clear();
  EXPECT_THROW(kappa_sweep(c), ConfigError);
}
