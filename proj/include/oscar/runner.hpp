#pragma once

// Experiment orchestration: the closed-loop sample loop shared by all
// dynamics, trajectory records, classification, the Gaussian/SME
// comparison and the spin-noise sweep.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "oscar/config.hpp"
#include "oscar/errors.hpp"
#include "oscar/feedback.hpp"
#include "oscar/gaussian.hpp"
#include "oscar/parallel.hpp"
#include "oscar/params.hpp"
#include "oscar/rng.hpp"
#include "oscar/sme.hpp"
#include "oscar/spectral.hpp"

namespace oscar {

/// One recorded row; the field order is the CSV column order.
struct Sample {
  double t = 0.0;
  double zbar = 0.0;
  double r_u = 0.0;
  double Z_u = 0.0;
  double Z_d = 0.0;
  double vZZ_u = 0.0;
  double vZZ_d = 0.0;
  double I_c = 0.0;
  double f_t = 0.0;
  double Amp_t = 0.0;
};

inline constexpr std::array<const char*, 10> trajectory_columns{"t",     "zbar",  "r_u", "Z_u", "Z_d",
                                                                "vZZ_u", "vZZ_d", "I_c", "f_t", "Amp_t"};

/// Counts crossings of r_u = 0.5 that follow an excursion beyond [0.1, 0.9].
/// settled_count() keeps only the flips after r_u first left [0.01, 0.99],
/// which drops reversals during the initial localization transient.
class FlipCounter {
 public:
  void update(double r_u) {
    if (r_u > 0.9) armed_ = 1;
    else if (r_u < 0.1) armed_ = -1;
    else if ((armed_ == 1 && r_u < 0.5) || (armed_ == -1 && r_u > 0.5)) {
      ++count_;
      if (settled_) ++settled_count_;
      armed_ = 0;
    }
    if (r_u > 0.99 || r_u < 0.01) settled_ = true;
  }
  std::size_t count() const { return count_; }
  std::size_t settled_count() const { return settled_count_; }

 private:
  int armed_ = 0;
  bool settled_ = false;
  std::size_t count_ = 0;
  std::size_t settled_count_ = 0;
};

struct RunSummary {
  std::size_t samples = 0;
  std::size_t flips = 0;
  std::size_t settled_flips = 0;  // flips after first localizing beyond [0.01, 0.99]
  std::size_t up_samples = 0;    // r_u > 0.99
  std::size_t down_samples = 0;  // r_u < 0.01
  double r_u_mid = 0.5;          // r_u at the middle sample of the window
  double min_uncertainty = 0.25;

  double localized_fraction() const {
    return samples ? static_cast<double>(up_samples + down_samples) / static_cast<double>(samples) : 0.0;
  }
  /// Localized state over the majority of the window.
  SpinVerdict majority_state() const {
    if (2 * up_samples > samples) return SpinVerdict::up;
    if (2 * down_samples > samples) return SpinVerdict::down;
    return SpinVerdict::indeterminate;
  }
  SpinVerdict midpoint_state() const { return r_u_mid > 0.5 ? SpinVerdict::up : SpinVerdict::down; }
};

class GaussianModel {
 public:
  GaussianModel(const SystemParams& p, const InitialCondition& ic)
      : p_(p), s_(default_initial_state(p, ic)),
        check_uncertainty_(uncertainty_product(ic.vZZ0, ic.vPP0, ic.vZP0) >= 0.25) {}

  void advance(double f_t, double dt, double dW, std::uint64_t step_index) {
    s_ = step(s_, p_, f_t, dt, dW, step_index);
  }

  Sample observe() const {
    Sample row;
    row.zbar = expected_position(s_);
    row.r_u = s_.r_u;
    row.Z_u = s_.Z_u;
    row.Z_d = s_.Z_d;
    row.vZZ_u = s_.vZZ_u;
    row.vZZ_d = s_.vZZ_d;
    return row;
  }

  /// Smallest packet uncertainty product; throws once it falls below hbar^2/4.
  double check(std::uint64_t step_index) const {
    const double d = std::min(uncertainty_product(s_.vZZ_u, s_.vPP_u, s_.vZP_u),
                              uncertainty_product(s_.vZZ_d, s_.vPP_d, s_.vZP_d));
    if (check_uncertainty_ && d < 0.25 * (1.0 - 1e-9))
      throw IntegrationError("uncertainty product fell to " + format_double(d), step_index);
    return d;
  }

  const GaussianState& state() const { return s_; }

 private:
  SystemParams p_;
  GaussianState s_;
  bool check_uncertainty_;
};

/// Packet means only, no decoherence and no measurement: r_u never moves.
class UnitaryModel {
 public:
  UnitaryModel(const SystemParams& p, const InitialCondition& ic)
      : p_(p), m_{ic.Z0, ic.p0, ic.Z0, ic.p0, ic.r_u0}, vZZ_(ic.vZZ0) {
    validate(ic);
  }

  void advance(double f_t, double dt, double, std::uint64_t) { m_ = unitary_step(m_, p_, f_t, dt); }

  Sample observe() const {
    Sample row;
    row.zbar = m_.r_u * m_.Z_u + (1.0 - m_.r_u) * m_.Z_d;
    row.r_u = m_.r_u;
    row.Z_u = m_.Z_u;
    row.Z_d = m_.Z_d;
    row.vZZ_u = row.vZZ_d = vZZ_;
    return row;
  }

  double check(std::uint64_t) const { return 0.25; }
  const PacketMeans& means() const { return m_; }

 private:
  SystemParams p_;
  PacketMeans m_;
  double vZZ_;
};

struct SmeDiagnostics {
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 1.0;
  double max_n_mean = 0.0;
  double max_edge_population = 0.0;  // weight in the top two Fock levels
};

class SmeModel {
 public:
  static constexpr std::size_t eigen_check_every = 1000;

  /// conditioned = false integrates the measurement-averaged Lindblad equation.
  SmeModel(const SystemParams& p, const InitialCondition& ic, int dim, bool conditioned = true)
      : conditioned_(conditioned),
        ops_(std::make_unique<OperatorSet>(build_operators(dim, p))),
        integ_(std::make_unique<SmeIntegrator>(*ops_)),
        st_(product_state(*ops_, ic.Z0, ic.p0, ic.r_u0)) {
    validate(ic);
    refresh();
  }

  void advance(double f_t, double dt, double dW, std::uint64_t) {
    if (conditioned_)
      integ_->step(st_, f_t, dt, dW);
    else
      integ_->step_unconditioned(st_, f_t, dt);
    diag_.max_trace_error = std::max(diag_.max_trace_error, integ_->last_stats().trace_error);
    diag_.max_hermiticity_error = std::max(diag_.max_hermiticity_error, integ_->last_stats().hermiticity_error);
    dirty_ = true;
  }

  Sample observe() {
    refresh();
    Sample row;
    row.zbar = m_.zbar;
    row.r_u = m_.r_u;
    row.Z_u = m_.Z_u;
    row.Z_d = m_.Z_d;
    row.vZZ_u = m_.vZZ_u;
    row.vZZ_d = m_.vZZ_d;
    return row;
  }

  /// Truncation guard every sample, eigenvalue spot check every
  /// eigen_check_every samples.
  double check(std::uint64_t step_index) {
    refresh();
    diag_.max_n_mean = std::max(diag_.max_n_mean, m_.n_mean);
    const int d = ops_->dim;
    double edge = 0.0;
    for (int n = d - 2; n < d; ++n) edge += st_.rho(n, n).real() + st_.rho(d + n, d + n).real();
    diag_.max_edge_population = std::max(diag_.max_edge_population, edge);
    if (m_.n_mean > 0.7 * ops_->dim)
      throw TruncationError("<n> = " + format_double(m_.n_mean) + " exceeds 0.7 dim at step " +
                            std::to_string(step_index) + "; raise dim");
    if (checks_++ % eigen_check_every == 0) {
      const double ev = min_eigenvalue(st_.rho);
      diag_.min_eigenvalue = std::min(diag_.min_eigenvalue, ev);
      if (ev < -1e-4)
        throw PositivityError("density matrix eigenvalue " + format_double(ev) + " at step " +
                              std::to_string(step_index));
    }
    return 0.25;
  }

  const SmeDiagnostics& diagnostics() const { return diag_; }
  const DensityState& state() const { return st_; }
  const OperatorSet& operators() const { return *ops_; }

 private:
  void refresh() {
    if (!dirty_) return;
    m_ = extract_moments(st_, *ops_);
    dirty_ = false;
  }

  bool conditioned_;
  std::unique_ptr<OperatorSet> ops_;
  std::unique_ptr<SmeIntegrator> integ_;
  DensityState st_;
  SmeMoments m_;
  bool dirty_ = true;
  std::size_t checks_ = 0;
  SmeDiagnostics diag_;
};

/// Photocurrent, amplitude estimate and feedback force, advanced once per sample.
class ClosedLoop {
 public:
  explicit ClosedLoop(const SystemParams& p) : p_(p), fb_(p.dt, p.amp_set, p.lowpass_cutoff) {}

  double force() const { return f_; }

  /// Completes a row whose dynamics columns are filled: synthesises I_c
  /// from the summed increment, updates Amp and the next-interval force.
  void close(Sample& row, double dW_sum) {
    row.I_c = photocurrent_sample(row.zbar, dW_sum, p_.dt, p_.lambda_pc);
    row.Amp_t = estimate_amplitude(fb_, row.I_c, row.t);
    f_ = feedback_force(fb_, p_.g_fb, p_.amp_set, p_.fb_polarity);
    row.f_t = f_;
  }

 private:
  SystemParams p_;
  FeedbackState fb_;
  double f_ = 0.0;
};

namespace detail {

inline void tally(RunSummary& s, FlipCounter& flips, const Sample& row, std::size_t k, std::size_t n) {
  flips.update(row.r_u);
  s.flips = flips.count();
  s.settled_flips = flips.settled_count();
  if (row.r_u > 0.99) ++s.up_samples;
  if (row.r_u < 0.01) ++s.down_samples;
  if (k == n / 2) s.r_u_mid = row.r_u;
  s.samples = k + 1;
}

}  // namespace detail

/// The per-sample loop: for each internal step draw dW and advance the
/// dynamics under the held force; then synthesise I_c, update Amp and the
/// next-interval force. sink(const Sample&) receives every row.
template <class Model, class Sink>
RunSummary drive(Model& model, const RunConfig& c, std::size_t trajectory, Sink&& sink) {
  const int sub = substeps(c);
  const double sq = std::sqrt(c.dt_int);
  const NormalStream noise(c.seed, trajectory);
  ClosedLoop loop(c.params);
  FlipCounter flips;
  RunSummary summary;
  for (std::size_t k = 0; k < c.n_samples; ++k) {
    double dW_sum = 0.0;
    const std::uint64_t base = static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(sub);
    for (int j = 0; j < sub; ++j) {
      const double dW = c.noise ? noise(base + j) * sq : 0.0;
      model.advance(loop.force(), c.dt_int, dW, base + j);
      dW_sum += dW;
    }
    summary.min_uncertainty = std::min(summary.min_uncertainty, model.check(base + sub));
    Sample row = model.observe();
    row.t = static_cast<double>(k + 1) * c.params.dt;
    loop.close(row, dW_sum);
    detail::tally(summary, flips, row, k, c.n_samples);
    sink(static_cast<const Sample&>(row));
  }
  return summary;
}

/// Runs fn(model) with the dynamics selected by c.mode; classify and sweep
/// use the Gaussian model.
template <class Fn>
decltype(auto) with_model(const RunConfig& c, Fn&& fn) {
  if (c.mode == "unitary") {
    UnitaryModel m(c.params, c.ic);
    return fn(m);
  }
  if (c.mode == "sme") {
    SmeModel m(c.params, c.ic, c.dim, c.noise);
    return fn(m);
  }
  GaussianModel m(c.params, c.ic);
  return fn(m);
}

struct TrajectoryRecord {
  std::vector<Sample> rows;
  RunSummary summary;

  std::vector<double> column(double Sample::*field) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.*field);
    return out;
  }
};

inline TrajectoryRecord run_trajectory(const RunConfig& c, std::size_t trajectory = 0) {
  TrajectoryRecord rec;
  rec.rows.reserve(c.n_samples);
  rec.summary = with_model(c, [&](auto& m) {
    return drive(m, c, trajectory, [&](const Sample& s) { rec.rows.push_back(s); });
  });
  return rec;
}

struct ClassificationReport {
  std::size_t trajectory = 0;
  double t_sampling = 0.0;
  double df = 0.0;
  bool resolves = false;
  double f_carrier = 0.0;
  Band band{};
  Peak peak{};
  double shift = 0.0;  // f_peak - f_carrier
  double min_shift = 0.0;
  SpinVerdict verdict = SpinVerdict::indeterminate;
  SpinVerdict truth = SpinVerdict::indeterminate;  // majority localized state
  SpinVerdict midpoint = SpinVerdict::indeterminate;
  double localized_fraction = 0.0;
  bool localized = false;  // localized for >= 90% of the window
  RunSummary summary;

  bool correct() const { return verdict != SpinVerdict::indeterminate && verdict == truth; }
};

/// Classifies an already recorded signal (zbar or I_c).
inline ClassificationReport classify_signal(const RunConfig& c, std::span<const double> signal,
                                            const RunSummary& summary, Spectrum* spectrum_out = nullptr) {
  ClassificationReport rep;
  rep.t_sampling = static_cast<double>(signal.size()) * c.params.dt;
  rep.df = frequency_resolution(signal.size(), c.params.dt);
  rep.resolves = resolves_shift(signal.size(), c.params.dt, c.params);
  rep.f_carrier = carrier_frequency();
  rep.band = classification_band(c);
  Spectrum spec = power_spectrum(signal, c.params.dt);
  rep.peak = peak_frequency(spec, rep.band);
  rep.shift = rep.peak.f_peak - rep.f_carrier;
  rep.min_shift = effective_min_shift(c);
  rep.verdict = classify_spin(rep.peak.f_peak, rep.f_carrier, rep.min_shift);
  rep.summary = summary;
  rep.truth = summary.majority_state();
  rep.midpoint = summary.midpoint_state();
  rep.localized_fraction = summary.localized_fraction();
  rep.localized = rep.localized_fraction >= 0.9;
  if (spectrum_out) *spectrum_out = std::move(spec);
  return rep;
}

/// Gaussian closed loop for n_samples * dt time units, then spectrum and verdict.
inline ClassificationReport run_classification(const RunConfig& c, std::size_t trajectory = 0,
                                               Spectrum* spectrum_out = nullptr,
                                               TrajectoryRecord* record_out = nullptr) {
  if (!is_power_of_two(c.n_samples)) throw ConfigError("n_samples must be a power of two for classification");
  const bool use_ic = c.signal == "photocurrent";
  std::vector<double> signal;
  signal.reserve(c.n_samples);
  GaussianModel model(c.params, c.ic);
  const auto summary = drive(model, c, trajectory, [&](const Sample& s) {
    signal.push_back(use_ic ? s.I_c : s.zbar);
    if (record_out) record_out->rows.push_back(s);
  });
  if (record_out) record_out->summary = summary;
  auto rep = classify_signal(c, signal, summary, spectrum_out);
  rep.trajectory = trajectory;
  return rep;
}

/// Runs fn(trajectory) for trajectories 0..K-1 on a worker pool and
/// returns the results in trajectory order.
template <class Fn>
auto run_ensemble(std::size_t count, Fn&& fn, unsigned threads = 0) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<Result> out(count);
  parallel_for(count, [&](std::size_t i) { out[i] = fn(i); }, threads);
  return out;
}

struct CompareReport {
  std::vector<Sample> gaussian;
  std::vector<Sample> sme;
  double zbar_rms = 0.0;  // |<Z>_G - <Z>_SME| / amp_set
  double zbar_max = 0.0;
  double r_u_rms = 0.0;
  double r_u_max = 0.0;
  SmeDiagnostics sme_diagnostics;
};

/// Gaussian and SME trajectories driven by one shared dW stream, each with
/// its own photocurrent and feedback loop.
inline CompareReport compare_gaussian_sme(const RunConfig& c, std::size_t trajectory = 0) {
  if (c.params.amp_set > 6.0) throw ConfigError("compare needs amp_set <= 6");
  const int sub = substeps(c);
  const double sq = std::sqrt(c.dt_int);
  const NormalStream noise(c.seed, trajectory);
  GaussianModel gm(c.params, c.ic);
  SmeModel sm(c.params, c.ic, c.dim, c.noise);
  ClosedLoop gl(c.params), sl(c.params);
  CompareReport rep;
  rep.gaussian.reserve(c.n_samples);
  rep.sme.reserve(c.n_samples);
  double sz = 0.0, sr = 0.0;
  for (std::size_t k = 0; k < c.n_samples; ++k) {
    double dW_sum = 0.0;
    const std::uint64_t base = static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(sub);
    for (int j = 0; j < sub; ++j) {
      const double dW = c.noise ? noise(base + j) * sq : 0.0;
      gm.advance(gl.force(), c.dt_int, dW, base + j);
      sm.advance(sl.force(), c.dt_int, dW, base + j);
      dW_sum += dW;
    }
    gm.check(base + sub);
    sm.check(base + sub);
    const double t = static_cast<double>(k + 1) * c.params.dt;
    Sample g = gm.observe(), s = sm.observe();
    g.t = s.t = t;
    gl.close(g, dW_sum);
    sl.close(s, dW_sum);
    const double ez = std::abs(g.zbar - s.zbar) / c.params.amp_set;
    const double er = std::abs(g.r_u - s.r_u);
    sz += ez * ez;
    sr += er * er;
    rep.zbar_max = std::max(rep.zbar_max, ez);
    rep.r_u_max = std::max(rep.r_u_max, er);
    rep.gaussian.push_back(g);
    rep.sme.push_back(s);
  }
  const double n = static_cast<double>(std::max<std::size_t>(c.n_samples, 1));
  rep.zbar_rms = std::sqrt(sz / n);
  rep.r_u_rms = std::sqrt(sr / n);
  rep.sme_diagnostics = sm.diagnostics();
  return rep;
}

struct SweepRow {
  double kappa_s = 0.0;
  std::size_t runs = 0;
  double mean_flips = 0.0;
  double flips_stderr = 0.0;
  double mean_settled_flips = 0.0;
  double success_rate = 0.0;  // verdict matches the state at the window midpoint
  std::vector<std::size_t> flips;
};

/// For every kappa_s in the sweep list, an ensemble of closed-loop runs
/// scored for flips and classification against the midpoint state.
inline std::vector<SweepRow> kappa_sweep(const RunConfig& c, unsigned threads = 0) {
  if (c.sweep.empty()) throw ConfigError("sweep list is empty");
  std::vector<SweepRow> table;
  for (double kappa : c.sweep) {
    RunConfig rc = c;
    rc.params.kappa_s = kappa;
    const auto reports =
        run_ensemble(rc.ensemble, [&](std::size_t i) { return run_classification(rc, i); }, threads);
    SweepRow row;
    row.kappa_s = kappa;
    row.runs = reports.size();
    double sum = 0.0, sum2 = 0.0, settled = 0.0;
    std::size_t good = 0;
    for (const auto& r : reports) {
      const double f = static_cast<double>(r.summary.flips);
      row.flips.push_back(r.summary.flips);
      sum += f;
      sum2 += f * f;
      settled += static_cast<double>(r.summary.settled_flips);
      if (r.verdict == r.midpoint) ++good;
    }
    const double n = static_cast<double>(row.runs);
    row.mean_flips = sum / n;
    row.mean_settled_flips = settled / n;
    row.flips_stderr = row.runs > 1 ? std::sqrt(std::max(0.0, (sum2 - sum * sum / n) / (n - 1.0)) / n) : 0.0;
    row.success_rate = static_cast<double>(good) / n;
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace oscar
