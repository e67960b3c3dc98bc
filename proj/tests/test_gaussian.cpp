#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "oscar/gaussian.hpp"
#include "oscar/rng.hpp"

using namespace oscar;

namespace {

SystemParams quiet_params() {
  SystemParams p = reference_params();
  p.gamma_damp = 0.0;
  p.A2 = 0.0;
  p.kappa_s = 0.0;
  return with_derived(p);
}

}  // namespace

TEST(Drift, SpinRelaxationTerm) {
  auto p = reference_params();
  p.kappa_s = 1e-3;
  GaussianState s;
  s.r_u = 0.5;
  EXPECT_EQ(drift(s, p, 0.0).r_u, 0.0);
  s.r_u = 0.25;
  EXPECT_NEAR(drift(s, p, 0.0).r_u, 5e-4, 1e-18);
}

TEST(Drift, SymmetricPacketsDecouple) {
  auto p = reference_params();
  p.kappa_s = 0.0;
  GaussianState s;
  s.r_u = 0.3;
  s.Z_u = s.Z_d = 7.0;
  s.p_u = s.p_d = -2.0;
  s.vZZ_u = s.vZZ_d = 0.8;
  s.vPP_u = s.vPP_d = 0.6;
  s.vZP_u = s.vZP_d = 0.1;
  const double f = 0.01;
  const auto d = drift(s, p, f);
  EXPECT_EQ(d.r_u, 0.0);
  EXPECT_DOUBLE_EQ(d.Z_u, s.p_u);
  EXPECT_DOUBLE_EQ(d.Z_d, s.p_d);
  const double g2 = 2.0 * p.gamma_damp;
  EXPECT_DOUBLE_EQ(d.p_u, -(1.0 + 2.0 * p.gamma_big) * s.Z_u - g2 * s.p_u + f);
  EXPECT_DOUBLE_EQ(d.p_d, -(1.0 - 2.0 * p.gamma_big) * s.Z_d - g2 * s.p_d + f);
  // with kappa_s on, identical packets still see no exchange term
  p.kappa_s = 1e-3;
  const auto d2 = drift(s, p, f);
  EXPECT_DOUBLE_EQ(d2.Z_u, d.Z_u);
  EXPECT_DOUBLE_EQ(d2.vZZ_u, d.vZZ_u);
  EXPECT_DOUBLE_EQ(d2.vPP_d, d.vPP_d);
}

TEST(Drift, RejectsUnclampedProbability) {
  GaussianState s;
  s.r_u = 0.0;
  EXPECT_THROW(drift(s, reference_params(), 0.0), ConsistencyError);
}

TEST(Diffusion, ZeroWithoutMonitoring) {
  GaussianState s;
  s.Z_u = 3.0;
  s.Z_d = -1.0;
  auto p = reference_params();
  p.A2 = 0.0;
  const auto b = diffusion(s, p);
  for (int i = 0; i < GaussianState::size; ++i) EXPECT_EQ(b[i], 0.0);
  p = reference_params();
  p.e_d = 0.0;
  const auto b2 = diffusion(s, p);
  for (int i = 0; i < GaussianState::size; ++i) EXPECT_EQ(b2[i], 0.0);
}

TEST(Diffusion, SpinTermReference) {
  GaussianState s;
  s.r_u = 0.5;
  s.Z_u = 1.0;
  s.Z_d = -1.0;
  EXPECT_NEAR(diffusion(s, reference_params()).r_u, 6.453681120105021e-2, 1e-16);
  s.Z_d = s.Z_u;
  s.vZZ_u = 4.0;
  s.vZZ_d = 0.1;
  EXPECT_EQ(diffusion(s, reference_params()).r_u, 0.0);
}

TEST(ExpectedPosition, Identities) {
  GaussianState s;
  s.r_u = 0.3;
  s.Z_u = 2.0;
  s.Z_d = -1.0;
  EXPECT_NEAR(expected_position(s), -0.1, 1e-15);
  s.r_u = 1.0;
  EXPECT_EQ(expected_position(s), 2.0);
  s.r_u = 0.5;
  s.Z_d = -2.0;
  EXPECT_EQ(expected_position(s), 0.0);
}

TEST(Step, OnePeriodOfTheUpPacketReturnsToStart) {
  const auto p = quiet_params();
  GaussianState s;
  s.r_u = 0.5;
  s.Z_u = s.Z_d = -50.0;
  const double period = 2.0 * pi / std::sqrt(1.0 + 2.0 * p.gamma_big);
  const double dt = 1e-3;
  const auto whole = static_cast<long>(period / dt);
  for (long k = 0; k < whole; ++k) s = step(s, p, 0.0, dt, 0.0, k);
  s = step(s, p, 0.0, period - whole * dt, 0.0, whole);
  const double err = std::hypot(s.Z_u + 50.0, s.p_u) / 50.0;
  EXPECT_LT(err, 1e-6);
}

TEST(Step, ZeroNoiseMatchesDeterministicHeun) {
  auto p = reference_params();
  p.kappa_s = 0.0;
  GaussianState s = default_initial_state(p, reference_initial_condition(p));
  s.r_u = 0.7;
  s.Z_u = -49.0;
  GaussianState ref = s;
  const double dt = 1e-3;
  for (int k = 0; k < 20000; ++k) {
    s = step(s, p, 0.02, dt, 0.0, k);
    // predictor, then two trapezoidal corrector passes
    const auto a0 = drift(ref, p, 0.02);
    GaussianState pred;
    for (int i = 0; i < GaussianState::size; ++i) pred[i] = ref[i] + a0[i] * dt;
    for (int pass = 0; pass < 2; ++pass) {
      const auto a1 = drift(pred, p, 0.02);
      for (int i = 0; i < GaussianState::size; ++i) pred[i] = ref[i] + 0.5 * (a0[i] + a1[i]) * dt;
    }
    ref = pred;
  }
  for (int i = 0; i < GaussianState::size; ++i) EXPECT_NEAR(s[i], ref[i], 1e-12 * (1.0 + std::abs(ref[i])));
  EXPECT_EQ(s.r_u, 0.7);
}

TEST(Step, SameSeedIsBitIdentical) {
  auto p = reference_params();
  p.kappa_s = 1e-3;
  auto run = [&](std::uint64_t seed) {
    GaussianState s = default_initial_state(p, reference_initial_condition(p));
    NormalStream ns(seed, 0);
    for (std::uint64_t k = 0; k < 50000; ++k) s = step(s, p, 0.0, 1e-3, ns(k) * std::sqrt(1e-3), k);
    return s;
  };
  const auto a = run(9), b = run(9), c = run(10);
  EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  EXPECT_NE(std::memcmp(&a, &c, sizeof a), 0);
}

TEST(Step, ClampsProbability) {
  auto p = reference_params();
  p.kappa_s = 0.0;
  GaussianState s;
  s.r_u = 1e-7;
  s.Z_u = 5.0;
  s.Z_d = -5.0;
  // a huge negative kick would push r_u below zero
  s = step(s, p, 0.0, 1e-3, -50.0, 0);
  EXPECT_GE(s.r_u, prob_clamp);
  EXPECT_LE(s.r_u, 1.0 - prob_clamp);
  // the nearly empty packet is slaved to the occupied one
  EXPECT_EQ(s.Z_u, s.Z_d);
}

TEST(Step, NegativeVarianceIsRefinedOrReported) {
  auto p = quiet_params();
  GaussianState s;
  s.vZP_u = s.vZP_d = 0.4;
  // one coarse step overshoots vZZ below zero; the bridge substeps do not
  const double dt = 1.5;
  EXPECT_LT(detail::heun(s, p, 0.0, dt, 0.0, freeze_threshold(p, dt)).vZZ_u, 0.0);
  const auto out = step(s, p, 0.0, dt, 0.0, 7);
  EXPECT_GT(out.vZZ_u, 0.0);
  EXPECT_GT(uncertainty_product(out.vZZ_u, out.vPP_u, out.vZP_u), 0.0);

  GaussianState bad;
  bad.vZZ_u = -0.1;
  try {
    step(bad, p, 0.0, 1e-3, 0.0, 42);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_EQ(e.step(), 42u);
  }
}

TEST(Step, UncertaintyProductStaysPhysical) {
  auto p = reference_params();
  p.kappa_s = 1e-3;
  GaussianState s = default_initial_state(p, reference_initial_condition(p));
  NormalStream ns(3, 0);
  double worst = 1.0;
  for (std::uint64_t k = 0; k < 400000; ++k) {
    s = step(s, p, 0.0, 1e-3, ns(k) * std::sqrt(1e-3), k);
    worst = std::min({worst, uncertainty_product(s.vZZ_u, s.vPP_u, s.vZP_u),
                      uncertainty_product(s.vZZ_d, s.vPP_d, s.vZP_d)});
  }
  EXPECT_GE(worst, 0.25 * (1.0 - 1e-9));
}

TEST(Unitary, ProbabilityUntouched) {
  const auto p = reference_params();
  PacketMeans m{-50.0, 0.0, -50.0, 0.0, 0.37};
  for (int k = 0; k < 100000; ++k) m = unitary_step(m, p, 0.0, 1e-3);
  EXPECT_EQ(m.r_u, 0.37);
}

TEST(Unitary, NoCouplingMeansCommonFrequency) {
  auto p = reference_params();
  p.eta = 0.0;
  p = with_derived(p);
  PacketMeans m{-50.0, 0.0, -50.0, 0.0, 0.5};
  const double dt = 1e-3;
  for (int k = 0; k < 6283; ++k) m = unitary_step(m, p, 0.0, dt);
  EXPECT_EQ(m.Z_u, m.Z_d);
  EXPECT_EQ(m.p_u, m.p_d);
  EXPECT_NEAR(m.Z_u, -50.0 * std::cos(6.283), 1e-9);
}

TEST(Unitary, PacketPhasesMatchShiftedFrequencies) {
  const auto p = reference_params();
  PacketMeans m{-50.0, 0.0, -50.0, 0.0, 0.5};
  const double dt = 1e-3;
  const int n = 100000;
  for (int k = 0; k < n; ++k) m = unitary_step(m, p, 0.0, dt);
  const double t = n * dt;
  EXPECT_NEAR(m.Z_u, -50.0 * std::cos(1.0017983829094555 * t), 1e-8);
  EXPECT_NEAR(m.Z_d, -50.0 * std::cos(0.9981983770774224 * t), 1e-8);
}
