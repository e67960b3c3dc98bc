#pragma once

// Two-packet Gaussian model: spin-up probability, packet means and packet
// covariances, conditioned on the homodyne record. Third-order central
// moments are dropped, so the covariances carry no noise term.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "oscar/errors.hpp"
#include "oscar/params.hpp"
#include "oscar/rng.hpp"

namespace oscar {

using DriftVector = GaussianState;
using DiffusionVector = GaussianState;

/// Below this weight a packet is slaved to the occupied one.
inline constexpr double freeze_threshold_min = 1e-6;

inline double freeze_threshold(const SystemParams& p, double dt) {
  return std::max(freeze_threshold_min, 2.0 * p.kappa_s * dt);
}

inline DriftVector drift(const GaussianState& s, const SystemParams& p, double f_t) {
  const double r = s.r_u;
  if (!(r >= prob_clamp && r <= 1.0 - prob_clamp))
    throw ConsistencyError("drift: r_u outside the clamp range");
  const double rd = 1.0 - r;

  const double k_up = mass * omega * omega + 2.0 * p.gamma_big;
  const double k_dn = mass * omega * omega - 2.0 * p.gamma_big;
  const double meas = p.e_d * p.A2 * p.A2;
  const double heat_p = (p.A1 * p.A1 + p.A2 * p.A2) * hbar * hbar;
  const double heat_z = p.B1 * p.B1 * hbar * hbar;
  const double g2 = 2.0 * p.gamma_damp;

  const double dZ = s.Z_u - s.Z_d;
  const double dp = s.p_u - s.p_d;
  const double x_up = p.kappa_s * rd / r;  // exchange into the up packet
  const double x_dn = p.kappa_s * r / rd;

  DriftVector d;
  d.r_u = p.kappa_s * (1.0 - 2.0 * r);

  d.Z_u = s.p_u / mass - 4.0 * meas * s.vZZ_u * rd * dZ - x_up * dZ;
  d.p_u = -k_up * s.Z_u - g2 * s.p_u + f_t - x_up * dp - 4.0 * meas * s.vZP_u * rd * dZ;
  d.Z_d = s.p_d / mass + 4.0 * meas * s.vZZ_d * r * dZ + x_dn * dZ;
  d.p_d = -k_dn * s.Z_d - g2 * s.p_d + f_t + x_dn * dp + 4.0 * meas * s.vZP_d * r * dZ;

  d.vZZ_u = 2.0 * s.vZP_u / mass + heat_z - 4.0 * meas * s.vZZ_u * s.vZZ_u -
            x_up * (s.vZZ_u - s.vZZ_d - dZ * dZ);
  d.vPP_u = heat_p - 2.0 * k_up * s.vZP_u - 2.0 * g2 * s.vPP_u - 4.0 * meas * s.vZP_u * s.vZP_u -
            x_up * (s.vPP_u - s.vPP_d - dp * dp);
  d.vZP_u = -k_up * s.vZZ_u + s.vPP_u / mass - g2 * s.vZP_u - 4.0 * meas * s.vZP_u * s.vZZ_u -
            x_up * (s.vZP_u - s.vZP_d - dZ * dp);

  d.vZZ_d = 2.0 * s.vZP_d / mass + heat_z - 4.0 * meas * s.vZZ_d * s.vZZ_d +
            x_dn * (s.vZZ_u - s.vZZ_d + dZ * dZ);
  d.vPP_d = heat_p - 2.0 * k_dn * s.vZP_d - 2.0 * g2 * s.vPP_d - 4.0 * meas * s.vZP_d * s.vZP_d +
            x_dn * (s.vPP_u - s.vPP_d + dp * dp);
  d.vZP_d = -k_dn * s.vZZ_d + s.vPP_d / mass - g2 * s.vZP_d - 4.0 * meas * s.vZP_d * s.vZZ_d +
            x_dn * (s.vZP_u - s.vZP_d + dZ * dp);
  return d;
}

inline DiffusionVector diffusion(const GaussianState& s, const SystemParams& p) {
  const double c = 2.0 * std::sqrt(p.e_d) * p.A2;
  DiffusionVector b;
  b.r_u = c * s.r_u * (1.0 - s.r_u) * (s.Z_u - s.Z_d);
  b.Z_u = c * s.vZZ_u;
  b.p_u = c * s.vZP_u;
  b.Z_d = c * s.vZZ_d;
  b.p_d = c * s.vZP_d;
  b.vZZ_u = b.vPP_u = b.vZP_u = 0.0;
  b.vZZ_d = b.vPP_d = b.vZP_d = 0.0;
  return b;
}

inline double expected_position(const GaussianState& s) { return s.r_u * s.Z_u + (1.0 - s.r_u) * s.Z_d; }

namespace detail {

inline void copy_packet(GaussianState& s, bool up_from_down) {
  if (up_from_down) {
    s.Z_u = s.Z_d, s.p_u = s.p_d;
    s.vZZ_u = s.vZZ_d, s.vPP_u = s.vPP_d, s.vZP_u = s.vZP_d;
  } else {
    s.Z_d = s.Z_u, s.p_d = s.p_u;
    s.vZZ_d = s.vZZ_u, s.vPP_d = s.vPP_u, s.vZP_d = s.vZP_u;
  }
}

/// Clamp r_u and slave an (almost) empty packet to the occupied one.
inline void condition(GaussianState& s, double threshold) {
  s.r_u = std::clamp(s.r_u, prob_clamp, 1.0 - prob_clamp);
  if (s.r_u < threshold)
    copy_packet(s, true);
  else if (s.r_u > 1.0 - threshold)
    copy_packet(s, false);
}

inline bool finite(const GaussianState& s) {
  for (int i = 0; i < GaussianState::size; ++i)
    if (!std::isfinite(s[i])) return false;
  return true;
}

inline bool physical(const GaussianState& s) {
  return s.vZZ_u > 0.0 && s.vPP_u > 0.0 && s.vZZ_u * s.vPP_u > s.vZP_u * s.vZP_u && s.vZZ_d > 0.0 &&
         s.vPP_d > 0.0 && s.vZZ_d * s.vPP_d > s.vZP_d * s.vZP_d;
}

// One stochastic Heun step; drift averaged over pre-point and predictor,
// diffusion taken at the pre-point (Ito). The corrector runs twice, which
// halves the oscillator phase error of the single pass.
inline GaussianState heun(const GaussianState& s0, const SystemParams& p, double f_t, double dt, double dW,
                          double threshold) {
  const auto a0 = drift(s0, p, f_t);
  const auto b0 = diffusion(s0, p);
  GaussianState out;
  for (int i = 0; i < GaussianState::size; ++i) out[i] = s0[i] + a0[i] * dt + b0[i] * dW;
  for (int pass = 0; pass < 2; ++pass) {
    condition(out, threshold);
    const auto a1 = drift(out, p, f_t);
    for (int i = 0; i < GaussianState::size; ++i) out[i] = s0[i] + 0.5 * (a0[i] + a1[i]) * dt + b0[i] * dW;
  }
  condition(out, threshold);
  return out;
}

inline GaussianState refine(const GaussianState& s, const SystemParams& p, double f_t, double dt, double dW,
                            double threshold, int depth, std::uint64_t step_index) {
  auto out = heun(s, p, f_t, dt, dW, threshold);
  if (!finite(out)) throw IntegrationError("non-finite Gaussian state", step_index);
  if (physical(out)) return out;
  if (depth == 4) throw IntegrationError("negative variance persists at dt/16", step_index);
  // Brownian bridge midpoint
  const double half = 0.5 * dt;
  const double dW1 = 0.5 * dW + std::sqrt(0.25 * dt) * bridge_normal(dW, depth);
  const auto mid = refine(s, p, f_t, half, dW1, threshold, depth + 1, step_index);
  return refine(mid, p, f_t, half, dW - dW1, threshold, depth + 1, step_index);
}

}  // namespace detail

/// Advance by dt with Wiener increment dW ~ N(0, dt). A step producing a
/// non-positive covariance is retried on halved substeps down to dt/16.
inline GaussianState step(GaussianState s, const SystemParams& p, double f_t, double dt, double dW,
                          std::uint64_t step_index = 0) {
  if (!(dt > 0.0)) throw InvalidParameter("step: dt must be > 0");
  const double threshold = freeze_threshold(p, dt);
  detail::condition(s, threshold);
  return detail::refine(s, p, f_t, dt, dW, threshold, 0, step_index);
}

/// det of the packet covariance; >= 1/4 for a physical state.
inline double uncertainty_product(double vZZ, double vPP, double vZP) { return vZZ * vPP - vZP * vZP; }

struct PacketMeans {
  double Z_u, p_u, Z_d, p_d, r_u;
};

/// Closed first-order system without decoherence; classical RK4.
inline PacketMeans unitary_step(const PacketMeans& m, const SystemParams& p, double f_t, double dt) {
  if (!(dt > 0.0)) throw InvalidParameter("unitary_step: dt must be > 0");
  const double k_up = mass * omega * omega + 2.0 * p.gamma_big;
  const double k_dn = mass * omega * omega - 2.0 * p.gamma_big;
  // each packet: Z' = p/m, p' = -k Z + f
  auto advance = [&](double Z, double P, double k, double& Zo, double& Po) {
    const double z1 = P / mass, q1 = -k * Z + f_t;
    const double z2 = (P + 0.5 * dt * q1) / mass, q2 = -k * (Z + 0.5 * dt * z1) + f_t;
    const double z3 = (P + 0.5 * dt * q2) / mass, q3 = -k * (Z + 0.5 * dt * z2) + f_t;
    const double z4 = (P + dt * q3) / mass, q4 = -k * (Z + dt * z3) + f_t;
    Zo = Z + dt / 6.0 * (z1 + 2.0 * z2 + 2.0 * z3 + z4);
    Po = P + dt / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
  };
  PacketMeans out = m;
  advance(m.Z_u, m.p_u, k_up, out.Z_u, out.p_u);
  advance(m.Z_d, m.p_d, k_dn, out.Z_d, out.p_d);
  return out;
}

}  // namespace oscar
