#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "oscar/errors.hpp"
#include "oscar/params.hpp"

namespace oscar {

/// In-place iterative radix-2 decimation-in-time FFT, forward sign e^{-i...}.
inline void fft_radix2(std::span<std::complex<double>> a) {
  const std::size_t n = a.size();
  if (n < 1 || !std::has_single_bit(n)) throw InvalidParameter("FFT length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    // twiddles computed directly, not by recurrence, to keep round-off flat
    std::vector<std::complex<double>> w(half);
    for (std::size_t k = 0; k < half; ++k) w[k] = std::polar(1.0, ang * static_cast<double>(k));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + half] * w[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

/// DFT bins 0..N/2 of a real series, via one complex FFT of length N/2.
inline std::vector<std::complex<double>> real_fft(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2 || !std::has_single_bit(n)) throw InvalidParameter("FFT length must be a power of two");
  const std::size_t h = n / 2;
  std::vector<std::complex<double>> z(h);
  for (std::size_t k = 0; k < h; ++k) z[k] = {x[2 * k], x[2 * k + 1]};
  fft_radix2(z);

  std::vector<std::complex<double>> out(h + 1);
  const std::complex<double> I(0.0, 1.0);
  for (std::size_t k = 0; k <= h; ++k) {
    const auto zk = z[k % h];
    const auto zc = std::conj(z[(h - k) % h]);
    const auto even = 0.5 * (zk + zc);
    const auto odd = -0.5 * I * (zk - zc);
    out[k] = even + std::polar(1.0, -2.0 * pi * static_cast<double>(k) / static_cast<double>(n)) * odd;
  }
  return out;
}

/// One-sided energy spectrum. power[k] * df summed over bins equals
/// sum((x - mean)^2) * dt.
struct Spectrum {
  std::vector<double> freq;  // cycles per unit time
  std::vector<double> power;
  std::size_t n = 0;
  double dt = 0.0;
  double df = 0.0;
};

inline double frequency_resolution(std::size_t n, double dt) { return 1.0 / (static_cast<double>(n) * dt); }

inline Spectrum power_spectrum(std::span<const double> samples, double dt) {
  const std::size_t n = samples.size();
  if (n < 2 || !std::has_single_bit(n))
    throw InvalidParameter("power_spectrum: N = " + std::to_string(n) +
                           " is not a power of two; pad or truncate the series");
  if (!(dt > 0.0)) throw InvalidParameter("power_spectrum: dt must be > 0");
  double mean = 0.0;
  for (double v : samples) {
    if (!std::isfinite(v)) throw InvalidParameter("power_spectrum: non-finite sample");
    mean += v;
  }
  mean /= static_cast<double>(n);
  std::vector<double> centered(samples.begin(), samples.end());
  for (double& v : centered) v -= mean;

  const auto bins = real_fft(centered);
  Spectrum s;
  s.n = n;
  s.dt = dt;
  s.df = frequency_resolution(n, dt);
  s.freq.resize(bins.size());
  s.power.resize(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) {
    s.freq[k] = static_cast<double>(k) * s.df;
    const double weight = (k == 0 || k == n / 2) ? 1.0 : 2.0;
    s.power[k] = weight * dt * dt * std::norm(bins[k]);
  }
  return s;
}

struct Band {
  double lo;
  double hi;
};

struct Peak {
  double f_peak;     // centre of the maximal bin
  double power;
  std::size_t bin;
  double f_refined;  // 3-point parabolic interpolation; equals f_peak at band edges
};

/// Maximal bin inside [lo, hi]; ties go to the lower frequency.
inline Peak peak_frequency(const Spectrum& spec, Band band) {
  const double nyquist = 0.5 / spec.dt;
  if (!(band.lo >= 0.0 && band.hi <= nyquist && band.hi > band.lo))
    throw InvalidParameter("peak_frequency: band outside [0, Nyquist]");
  if (band.hi - band.lo <= 3.0 * spec.df) throw InvalidParameter("peak_frequency: band narrower than 3 bins");
  std::size_t best = spec.freq.size();
  for (std::size_t k = 0; k < spec.freq.size(); ++k) {
    if (spec.freq[k] < band.lo || spec.freq[k] > band.hi) continue;
    if (best == spec.freq.size() || spec.power[k] > spec.power[best]) best = k;
  }
  if (best == spec.freq.size()) throw InvalidParameter("peak_frequency: empty band");

  Peak p{spec.freq[best], spec.power[best], best, spec.freq[best]};
  if (best > 0 && best + 1 < spec.power.size()) {
    const double a = spec.power[best - 1], b = spec.power[best], c = spec.power[best + 1];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) p.f_refined = spec.freq[best] + 0.5 * (a - c) / denom * spec.df;
  }
  return p;
}

enum class SpinVerdict { up, down, indeterminate };

inline std::string_view to_string(SpinVerdict v) {
  switch (v) {
    case SpinVerdict::up: return "up";
    case SpinVerdict::down: return "down";
    default: return "indeterminate";
  }
}

/// Upward frequency shift means spin-up, downward means spin-down.
inline SpinVerdict classify_spin(double f_peak, double f_carrier, double min_shift) {
  const double shift = f_peak - f_carrier;
  if (shift > min_shift) return SpinVerdict::up;
  if (shift < -min_shift) return SpinVerdict::down;
  return SpinVerdict::indeterminate;
}

/// Carrier omega / 2 pi and the default dead zone Gamma / 4 pi.
inline double carrier_frequency() { return omega / (2.0 * pi); }
inline double default_min_shift(const SystemParams& p) { return p.gamma_big / (4.0 * pi); }

/// Detectability condition: the FFT must resolve the Gamma / 2 pi shift.
inline bool resolves_shift(std::size_t n, double dt, const SystemParams& p) {
  return frequency_resolution(n, dt) <= p.gamma_big / (2.0 * pi * mass * omega);
}

}  // namespace oscar
