#pragma once

// Model constants, derived coefficients and state types. Units: hbar = m =
// omega = 1 throughout. For orientation only: the dimensionless set below
// corresponds to a 16 kHz cantilever, and 50 amplitude units are 32 nm.

#include <cmath>
#include <string>
#include <vector>

#include "oscar/errors.hpp"

namespace oscar {

inline constexpr double hbar = 1.0;
inline constexpr double mass = 1.0;
inline constexpr double omega = 1.0;
inline constexpr double pi = 3.14159265358979323846;

/// Clamp margin for r_u; keeps r_d/r_u and r_u/r_d finite.
inline constexpr double prob_clamp = 1e-8;

inline double derive_gamma(double eta, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidParameter("epsilon must be > 0");
  return eta * eta / (2.0 * epsilon);
}

struct ThermalCoeffs {
  double A1;
  double B1;
};

inline ThermalCoeffs derive_thermal_coeffs(double gamma_damp, double kBT) {
  if (!(kBT > 0.0)) throw InvalidParameter("kBT must be > 0");
  if (!(gamma_damp >= 0.0)) throw InvalidParameter("gamma_damp must be >= 0");
  return {std::sqrt(4.0 * gamma_damp * mass * kBT / (hbar * hbar)),
          std::sqrt(gamma_damp / (4.0 * mass * kBT))};
}

/// Optical readout inputs for the photocurrent noise scale.
struct OpticsParams {
  double kappaE_over_gc = 1.9e3;  // 8 kappa E / gamma_c
  double gamma_c = 1.4e8;
  double Q = 1e5;
  double amp_scale = 50.0;
};

inline double derive_lambda(const OpticsParams& o, double e_d) {
  if (!(o.kappaE_over_gc > 0.0) || !(o.gamma_c > 0.0) || !(o.Q > 0.0))
    throw InvalidParameter("optics parameters must be > 0");
  if (!(o.amp_scale >= 0.0)) throw InvalidParameter("amp_scale must be >= 0");
  if (!(e_d > 0.0 && e_d <= 1.0)) throw InvalidParameter("e_d must lie in (0, 1]");
  // 8 kappa E = (8 kappa E / gamma_c) * gamma_c
  const double eight_kappa_e = o.kappaE_over_gc * o.gamma_c;
  return o.amp_scale * std::sqrt(o.gamma_c * o.gamma_c * o.gamma_c / e_d) / (eight_kappa_e * o.Q);
}

struct SystemParams {
  double eta = 0.6;
  double epsilon = 100.0;
  double gamma_big = 0.0;  // derived: eta^2 / (2 epsilon)
  double gamma_damp = 1e-5;
  double kappa_s = 1e-5;
  double e_d = 0.85;
  double kBT = 1e3;
  double A1 = 0.0;  // derived
  double B1 = 0.0;  // derived
  double A2 = 0.07;
  double B2 = 0.0;
  double lambda_pc = 0.0;
  double g_fb = 1e-4;
  double amp_set = 50.0;
  double dt = 0.02;  // sample spacing; the integrator subdivides it

  // feedback loop details
  double fb_polarity = -1.0;
  double lowpass_cutoff = 0.0;  // angular cutoff of the optional I_c low-pass; 0 = off
};

/// Fills gamma_big, A1 and B1 from the primary fields.
inline SystemParams with_derived(SystemParams p) {
  p.gamma_big = derive_gamma(p.eta, p.epsilon);
  const auto th = derive_thermal_coeffs(p.gamma_damp, p.kBT);
  p.A1 = th.A1;
  p.B1 = th.B1;
  return p;
}

/// The dimensionless parameter set of the single-spin measurement runs
/// (kappa_s = 1e-5, Lambda from the default optics block).
inline SystemParams reference_params() {
  SystemParams p;
  p.lambda_pc = derive_lambda(OpticsParams{}, p.e_d);
  return with_derived(p);
}

inline double adiabatic_ratio(const SystemParams& p) { return p.eta * p.amp_set / p.epsilon; }

/// Throws InvalidParameter on a hard violation; returns soft warnings.
inline std::vector<std::string> validate(const SystemParams& p) {
  std::vector<std::string> warnings;
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw InvalidParameter(msg);
  };
  require(p.epsilon > 0.0, "epsilon must be > 0");
  require(p.kBT > 0.0, "kBT must be > 0");
  require(p.gamma_damp >= 0.0, "gamma_damp must be >= 0");
  require(p.e_d > 0.0 && p.e_d <= 1.0, "e_d must lie in (0, 1]");
  require(p.kappa_s >= 0.0, "kappa_s must be >= 0");
  require(p.dt > 0.0, "dt must be > 0");
  require(p.amp_set > 0.0, "amp_set must be > 0");
  require(p.A2 >= 0.0 && p.B2 >= 0.0, "A2, B2 must be >= 0");
  require(p.lambda_pc >= 0.0, "lambda_pc must be >= 0");
  require(p.g_fb >= 0.0, "g_fb must be >= 0");
  require(p.fb_polarity == 1.0 || p.fb_polarity == -1.0, "fb_polarity must be +1 or -1");
  require(p.lowpass_cutoff >= 0.0, "lowpass_cutoff must be >= 0");
  require(p.gamma_big == p.eta * p.eta / (2.0 * p.epsilon), "gamma_big is not eta^2/(2 epsilon)");
  const auto th = derive_thermal_coeffs(p.gamma_damp, p.kBT);
  require(p.A1 == th.A1 && p.B1 == th.B1, "A1/B1 do not match gamma_damp and kBT");
  if (p.B2 != 0.0) warnings.emplace_back("B2 != 0 is not covered by the moment equations; ignored there");

  const double ratio = adiabatic_ratio(p);
  require(ratio < 0.5, "adiabatic validity violated: eta*amp_set/epsilon >= 0.5");
  if (ratio >= 0.3 - 1e-12)
    warnings.emplace_back("eta*amp_set/epsilon = " + std::to_string(ratio) + " is close to the adiabatic limit");
  return warnings;
}

/// Eleven dynamical variables of the two-packet Gaussian model.
struct GaussianState {
  double r_u = 0.5;
  double Z_u = 0.0, p_u = 0.0, Z_d = 0.0, p_d = 0.0;
  double vZZ_u = 0.5, vPP_u = 0.5, vZP_u = 0.0;
  double vZZ_d = 0.5, vPP_d = 0.5, vZP_d = 0.0;

  static constexpr int size = 11;

  double& operator[](int i) { return (&r_u)[i]; }
  double operator[](int i) const { return (&r_u)[i]; }
  double r_d() const { return 1.0 - r_u; }
};
static_assert(sizeof(GaussianState) == GaussianState::size * sizeof(double));

struct InitialCondition {
  double r_u0 = 0.5;
  double Z0 = -50.0;
  double p0 = 0.0;
  double vZZ0 = 0.5;  // coherent-state widths hbar/(2 m omega)
  double vPP0 = 0.5;
  double vZP0 = 0.0;
};

/// Equal superposition, cantilever at its lowest point -amp_set, at rest.
inline InitialCondition reference_initial_condition(const SystemParams& p) {
  InitialCondition ic;
  ic.Z0 = -p.amp_set;
  return ic;
}

inline void validate(const InitialCondition& ic) {
  if (!(ic.r_u0 >= 0.0 && ic.r_u0 <= 1.0)) throw InvalidParameter("r_u0 must lie in [0, 1]");
  if (!(ic.vZZ0 > 0.0 && ic.vPP0 > 0.0 && ic.vZZ0 * ic.vPP0 - ic.vZP0 * ic.vZP0 > 0.0))
    throw InvalidParameter("initial covariance must be positive-definite");
  if (!std::isfinite(ic.Z0) || !std::isfinite(ic.p0)) throw InvalidParameter("initial means must be finite");
}

inline GaussianState default_initial_state(const SystemParams&, const InitialCondition& ic) {
  validate(ic);
  GaussianState s;
  s.r_u = ic.r_u0;
  s.Z_u = s.Z_d = ic.Z0;
  s.p_u = s.p_d = ic.p0;
  s.vZZ_u = s.vZZ_d = ic.vZZ0;
  s.vPP_u = s.vPP_d = ic.vPP0;
  s.vZP_u = s.vZP_d = ic.vZP0;
  return s;
}

}  // namespace oscar
