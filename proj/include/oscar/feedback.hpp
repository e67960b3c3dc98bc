#pragma once

// Homodyne photocurrent, lock-in amplitude estimate and the delayed
// gain-controlled drive that holds the cantilever amplitude at its set point.

#include <cmath>
#include <cstddef>
#include <vector>

#include "oscar/errors.hpp"
#include "oscar/params.hpp"

namespace oscar {

/// Rescaled photocurrent over one sample interval: I_c dt = <Z> dt - Lambda dW.
inline double photocurrent_sample(double zbar, double dW, double dt, double lambda_pc) {
  return zbar - lambda_pc * dW / dt;
}

class FeedbackState {
 public:
  FeedbackState(double sample_dt, double amp_set, double lowpass_cutoff = 0.0)
      : amp_set_(amp_set),
        delay_len_(static_cast<std::size_t>(std::lround(0.5 * pi / (omega * sample_dt)))),
        window_len_(static_cast<std::size_t>(std::lround(2.0 * pi / (omega * sample_dt)))),
        delay_(delay_len_ + 1, 0.0),
        in_phase_(window_len_, 0.0),
        quadrature_(window_len_, 0.0) {
    if (!(sample_dt > 0.0)) throw InvalidParameter("feedback: sample spacing must be > 0");
    if (delay_len_ == 0 || window_len_ < 4) throw InvalidParameter("feedback: sample spacing too coarse");
    if (lowpass_cutoff > 0.0) lowpass_alpha_ = 1.0 - std::exp(-lowpass_cutoff * sample_dt);
  }

  /// Ingest one photocurrent sample taken at time t.
  void push(double I_c, double t, double omega_nominal = omega) {
    double fed = I_c;
    if (lowpass_alpha_ > 0.0) {
      lowpass_ = count_ == 0 ? I_c : lowpass_ + lowpass_alpha_ * (I_c - lowpass_);
      fed = lowpass_;
    }
    delay_[count_ % delay_.size()] = fed;

    const std::size_t slot = count_ % window_len_;
    const double ip = I_c * std::cos(omega_nominal * t);
    const double qu = I_c * std::sin(omega_nominal * t);
    sum_i_ += ip - in_phase_[slot];
    sum_q_ += qu - quadrature_[slot];
    in_phase_[slot] = ip;
    quadrature_[slot] = qu;
    ++count_;
    if (slot == window_len_ - 1) resum();
  }

  /// 2 sqrt(I^2 + Q^2) over the trailing period; amp_set until the window fills.
  double amplitude() const {
    if (count_ < window_len_) return amp_set_;
    const double i = sum_i_ / static_cast<double>(window_len_);
    const double q = sum_q_ / static_cast<double>(window_len_);
    return 2.0 * std::sqrt(i * i + q * q);
  }

  /// I_c(t - Delta), the sample pushed delay_length() samples ago.
  double delayed() const { return count_ > delay_len_ ? delay_[(count_ - 1 - delay_len_) % delay_.size()] : 0.0; }

  bool warmed_up() const { return count_ >= window_len_ + delay_len_; }
  std::size_t delay_length() const { return delay_len_; }
  std::size_t window_length() const { return window_len_; }
  std::size_t samples() const { return count_; }
  double amp_set() const { return amp_set_; }

 private:
  void resum() {
    sum_i_ = sum_q_ = 0.0;
    for (std::size_t k = 0; k < window_len_; ++k) {
      sum_i_ += in_phase_[k];
      sum_q_ += quadrature_[k];
    }
  }

  double amp_set_;
  std::size_t delay_len_;
  std::size_t window_len_;
  std::vector<double> delay_;
  std::vector<double> in_phase_;
  std::vector<double> quadrature_;
  double sum_i_ = 0.0;
  double sum_q_ = 0.0;
  std::size_t count_ = 0;
  double lowpass_alpha_ = 0.0;
  double lowpass_ = 0.0;
};

/// Push I_c and return the current amplitude estimate.
inline double estimate_amplitude(FeedbackState& fb, double I_c, double t, double omega_nominal = omega) {
  fb.push(I_c, t, omega_nominal);
  return fb.amplitude();
}

/// f = polarity * g * (AMP - Amp(t)) * I_c(t - Delta); zero during warm-up.
/// With I_c following +<Z>, polarity -1 puts the delayed sample in phase
/// with the velocity.
inline double feedback_force(const FeedbackState& fb, double g, double amp_set, double polarity = -1.0) {
  if (!fb.warmed_up()) return 0.0;
  return polarity * g * (amp_set - fb.amplitude()) * fb.delayed();
}

}  // namespace oscar
