#pragma once

// Stochastic master equation on a truncated oscillator (x) spin space,
// diffusive homodyne unravelling of the position measurement. Used as the
// reference the Gaussian model is validated against, at small amplitude.
//
// Index layout: spin-major, i = s * dim + n with s = 0 for the state aligned
// with the effective field (|v+>) and s = 1 for |v->.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "oscar/errors.hpp"
#include "oscar/params.hpp"

namespace oscar {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

/// Pentadiagonal operator stored by diagonals, offsets -2..2.
/// Entry (i, i + o) lives in diag[o + 2][i].
struct BandedOp {
  static constexpr int half_width = 2;
  int dim = 0;
  std::array<std::vector<cplx>, 5> diag;

  static BandedOp from_dense(const CMatrix& m) {
    BandedOp b;
    b.dim = static_cast<int>(m.rows());
    for (auto& d : b.diag) d.assign(b.dim, cplx{});
    for (int i = 0; i < b.dim; ++i)
      for (int j = 0; j < b.dim; ++j) {
        const int o = j - i;
        if (std::abs(o) <= half_width)
          b.diag[o + 2][i] = m(i, j);
        else if (std::abs(m(i, j)) > 1e-14)
          throw ConsistencyError("operator is not pentadiagonal");
      }
    return b;
  }

  bool has(int o) const {
    for (const auto& v : diag[o + 2])
      if (v != cplx{}) return true;
    return false;
  }
};

struct OperatorSet {
  int dim = 0;
  // oscillator factors
  CMatrix Z, P, R, N, I, Z2, P2;
  // spin factors: sigma_z' with eigenvalues +-1/2, sigma_x' the flip
  Eigen::Matrix2cd sigma_z, sigma_x;
  // full space (2 dim)
  CMatrix L1, L2, L3, P_up, P_down;
  Eigen::VectorXd h0;  // diagonal of the truncated p^2/2 + Z^2/2

  // banded blocks for the stepper
  BandedOp Zb, Pb, Z2b, P2b, Rb, Nb, L1b, L2b, L2dL2b;
  std::array<BandedOp, 2> K;  // -i H_rem,s - 1/2 sum L^dag L - kappa/2, f excluded
  SystemParams params;
};

namespace detail {

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace detail

/// Excitation expected from a coherent state of amplitude amp.
inline double expected_excitation(double amp) { return 0.5 * amp * amp; }

inline OperatorSet build_operators(int dim, const SystemParams& p) {
  if (dim < 4) throw InvalidParameter("build_operators: dim must be >= 4");
  if (expected_excitation(p.amp_set) > 0.7 * dim)
    throw TruncationError("build_operators: dim " + std::to_string(dim) + " too small for amp_set " +
                          std::to_string(p.amp_set));
  OperatorSet ops;
  ops.dim = dim;
  ops.params = p;
  const cplx i1(0.0, 1.0);

  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  const CMatrix ad = a.adjoint();
  const double s = std::sqrt(hbar / (2.0 * mass * omega));
  ops.Z = s * (a + ad);
  ops.P = i1 * std::sqrt(hbar * mass * omega / 2.0) * (ad - a);
  ops.R = 0.5 * (ops.Z * ops.P + ops.P * ops.Z);
  ops.N = ad * a;
  ops.I = CMatrix::Identity(dim, dim);
  ops.Z2 = ops.Z * ops.Z;
  ops.P2 = ops.P * ops.P;

  ops.sigma_z << 0.5, 0.0, 0.0, -0.5;
  ops.sigma_x << 0.0, 1.0, 1.0, 0.0;
  const CMatrix I2 = CMatrix::Identity(2, 2);
  const CMatrix up = (CMatrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished();
  const CMatrix dn = (CMatrix(2, 2) << 0.0, 0.0, 0.0, 1.0).finished();

  const CMatrix l1 = p.A1 * ops.Z + i1 * p.B1 * ops.P;
  const CMatrix l2 = p.A2 * ops.Z + i1 * p.B2 * ops.P;
  ops.L1 = detail::kron(I2, l1);
  ops.L2 = detail::kron(I2, l2);
  ops.L3 = std::sqrt(p.kappa_s) * detail::kron(CMatrix(ops.sigma_x), ops.I);
  ops.P_up = detail::kron(up, ops.I);
  ops.P_down = detail::kron(dn, ops.I);

  const CMatrix h0 = 0.5 * ops.P2 / mass + 0.5 * mass * omega * omega * ops.Z2;
  ops.h0 = h0.diagonal().real();
  if ((h0 - CMatrix(h0.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 1e-12)
    throw ConsistencyError("truncated oscillator Hamiltonian is not diagonal");

  ops.Zb = BandedOp::from_dense(ops.Z);
  ops.Pb = BandedOp::from_dense(ops.P);
  ops.Z2b = BandedOp::from_dense(ops.Z2);
  ops.P2b = BandedOp::from_dense(ops.P2);
  ops.Rb = BandedOp::from_dense(ops.R);
  ops.Nb = BandedOp::from_dense(ops.N);
  ops.L1b = BandedOp::from_dense(l1);
  ops.L2b = BandedOp::from_dense(l2);
  ops.L2dL2b = BandedOp::from_dense(l2.adjoint() * l2);

  const CMatrix lindblad = l1.adjoint() * l1 + l2.adjoint() * l2 + p.kappa_s * ops.I;
  for (int sector = 0; sector < 2; ++sector) {
    const double sign = sector == 0 ? 1.0 : -1.0;
    const CMatrix h_rem = sign * p.gamma_big * ops.Z2 + p.gamma_damp * ops.R;
    ops.K[sector] = BandedOp::from_dense(-i1 * h_rem / hbar - 0.5 * lindblad);
  }
  return ops;
}

/// 2 Gamma Z^2 (x) sigma_z': +Gamma Z^2 on the up block, -Gamma Z^2 on the down block.
inline CMatrix gamma_term(const OperatorSet& ops) {
  return 2.0 * ops.params.gamma_big * detail::kron(CMatrix(ops.sigma_z), ops.Z2);
}

/// Full effective Hamiltonian at feedback force f.
inline CMatrix effective_hamiltonian(const OperatorSet& ops, double f_t) {
  const auto& p = ops.params;
  const CMatrix osc = 0.5 * ops.P2 / mass + 0.5 * mass * omega * omega * ops.Z2 - f_t * ops.Z + p.gamma_damp * ops.R;
  return detail::kron(CMatrix::Identity(2, 2), osc) + gamma_term(ops);
}

struct DensityState {
  CMatrix rho;
  double t = 0.0;
};

/// Coherent oscillator state at (Z0, p0) times sqrt(r)|v+> + sqrt(1-r)|v->.
inline DensityState product_state(const OperatorSet& ops, double Z0, double p0, double r_u0) {
  const int dim = ops.dim;
  const cplx alpha(Z0 / std::sqrt(2.0 * hbar / (mass * omega)), p0 / std::sqrt(2.0 * hbar * mass * omega));
  Eigen::VectorXcd c(dim);
  // c_n = alpha^n / sqrt(n!), normalised afterwards
  c(0) = 1.0;
  for (int n = 1; n < dim; ++n) c(n) = c(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  c.normalize();
  Eigen::VectorXcd psi(2 * dim);
  psi.head(dim) = std::sqrt(r_u0) * c;
  psi.tail(dim) = std::sqrt(1.0 - r_u0) * c;
  return {psi * psi.adjoint(), 0.0};
}

struct SmeMoments {
  double r_u = 0.0;
  double Z_u = 0.0, p_u = 0.0, Z_d = 0.0, p_d = 0.0;
  double vZZ_u = 0.0, vPP_u = 0.0, vZP_u = 0.0;
  double vZZ_d = 0.0, vPP_d = 0.0, vZP_d = 0.0;
  bool up_present = false;
  bool down_present = false;
  double zbar = 0.0;  // <Z> over the whole state
  double n_mean = 0.0;
};

namespace detail {

// tr(A X) for banded A acting on a dim x dim block starting at (row0, col0) of rho
inline cplx banded_trace(const BandedOp& a, const CMatrix& rho, int off) {
  cplx acc{};
  for (int o = -2; o <= 2; ++o) {
    const auto& d = a.diag[o + 2];
    const int lo = std::max(0, -o), hi = std::min(a.dim, a.dim - o);
    for (int i = lo; i < hi; ++i) acc += d[i] * rho(off + i + o, off + i);
  }
  return acc;
}

// tr(A X B^dag) for banded A, B on the diagonal block of rho at (off, off)
inline cplx banded_sandwich_trace(const BandedOp& a, const CMatrix& rho, const BandedOp& b, int off) {
  cplx acc{};
  const int n = a.dim;
  for (int i = 0; i < n; ++i)
    for (int oa = -2; oa <= 2; ++oa) {
      const int k = i + oa;
      if (k < 0 || k >= n || a.diag[oa + 2][i] == cplx{}) continue;
      cplx row{};
      for (int ob = -2; ob <= 2; ++ob) {
        const int l = i + ob;
        if (l < 0 || l >= n) continue;
        row += rho(off + k, off + l) * std::conj(b.diag[ob + 2][i]);
      }
      acc += a.diag[oa + 2][i] * row;
    }
  return acc;
}

}  // namespace detail

inline constexpr double packet_presence_threshold = 1e-10;

inline SmeMoments extract_moments(const DensityState& st, const OperatorSet& ops) {
  const int dim = ops.dim;
  SmeMoments m;
  const double w_up = st.rho.topLeftCorner(dim, dim).trace().real();
  const double w_dn = st.rho.bottomRightCorner(dim, dim).trace().real();
  m.r_u = w_up / (w_up + w_dn);
  double zsum = 0.0;
  auto packet = [&](int off, double w, double& Zm, double& pm, double& vzz, double& vpp, double& vzp) {
    const double z = detail::banded_trace(ops.Zb, st.rho, off).real();
    zsum += z;
    if (w <= packet_presence_threshold) return false;
    Zm = z / w;
    pm = detail::banded_trace(ops.Pb, st.rho, off).real() / w;
    vzz = detail::banded_trace(ops.Z2b, st.rho, off).real() / w - Zm * Zm;
    vpp = detail::banded_trace(ops.P2b, st.rho, off).real() / w - pm * pm;
    vzp = detail::banded_trace(ops.Rb, st.rho, off).real() / w - Zm * pm;
    return true;
  };
  m.up_present = packet(0, w_up, m.Z_u, m.p_u, m.vZZ_u, m.vPP_u, m.vZP_u);
  m.down_present = packet(dim, w_dn, m.Z_d, m.p_d, m.vZZ_d, m.vPP_d, m.vZP_d);
  m.zbar = zsum / (w_up + w_dn);
  m.n_mean = (detail::banded_trace(ops.Nb, st.rho, 0) + detail::banded_trace(ops.Nb, st.rho, dim)).real() /
             (w_up + w_dn);
  return m;
}

inline double min_eigenvalue(const CMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// 1/2 sum |eig(a - b)| for Hermitian a, b.
inline double trace_distance(const CMatrix& a, const CMatrix& b) {
  const CMatrix d = 0.5 * ((a - b) + (a - b).adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

/// Diagnostics of the last step, measured before re-symmetrising and renormalising.
struct SmeStepStats {
  // unnormalised trace minus 1, less the zero-mean e_d (dW^2 - dt) Var(L2) and
  // dt dW cross terms of the Kraus form; what remains is O(dt^2)
  double trace_error = 0.0;
  double raw_trace_error = 0.0;
  double hermiticity_error = 0.0;
};

/// First-order SME integrator in Kraus form:
///   rho' = M rho M^dag + dt (L1 rho L1^dag + (1 - e_d) L2 rho L2^dag + L3 rho L3^dag)
///   M = I + dt (K + e_d m/2 L2 - e_d m^2/8) + sqrt(e_d) (L2 - m/2) dW,  m = <L2 + L2^dag>
/// Expanded to first order this is the Euler-Maruyama increment; the extra
/// e_d (dW^2 - dt) (L2 - m/2) rho (L2 - m/2)^dag keeps rho positive.
/// The bare oscillator part diag(h0) is applied exactly as half-step phase
/// rotations around the update of the remainder.
class SmeIntegrator {
 public:
  explicit SmeIntegrator(const OperatorSet& ops)
      : ops_(ops), dim_(ops.dim), diag_re_(ops.dim), diag_im_(ops.dim) {
    for (auto& b : work_) b.resize(dim_, dim_);
  }

  const SmeStepStats& last_stats() const { return stats_; }

  /// Step conditioned on the homodyne increment dW.
  void step(DensityState& st, double f_t, double dt, double dW) { advance(st, f_t, dt, dW, true); }

  /// Step of the unconditioned (measurement-averaged) Lindblad equation.
  void step_unconditioned(DensityState& st, double f_t, double dt) { advance(st, f_t, dt, 0.0, false); }

 private:
  void advance(DensityState& st, double f_t, double dt, double dW, bool conditioned) {
    if (!(dt > 0.0)) throw InvalidParameter("sme_step: dt must be > 0");
    const auto& p = ops_.params;
    rotate(st.rho, 0.5 * dt);

    const double eta = conditioned ? p.e_d : 0.0;
    const double zbar = (detail::banded_trace(ops_.Zb, st.rho, 0) + detail::banded_trace(ops_.Zb, st.rho, dim_)).real();
    // <L2 + L2^dag>; the i B2 p part cancels
    const double m = 2.0 * p.A2 * zbar;
    const double l2dl2 =
        (detail::banded_trace(ops_.L2dL2b, st.rho, 0) + detail::banded_trace(ops_.L2dL2b, st.rho, dim_)).real();

    const double se = std::sqrt(eta);
    for (int s = 0; s < 2; ++s)
      kraus_operator(kraus_[s], ops_.K[s], f_t, dt * (0.5 * eta * m) + se * dW,
                                 1.0 - dt * (0.125 * eta * m * m) - 0.5 * se * m * dW, dt);

    auto& uu = work_[0];
    auto& dd = work_[1];
    auto& ud = work_[2];
    uu = st.rho.topLeftCorner(dim_, dim_);
    dd = st.rho.bottomRightCorner(dim_, dim_);
    ud = st.rho.topRightCorner(dim_, dim_);

    block(uu, dd, 0, 0, dt, 1.0 - eta, work_[3]);
    block(dd, uu, 1, 1, dt, 1.0 - eta, work_[4]);
    block(ud, ud.adjoint(), 0, 1, dt, 1.0 - eta, work_[5]);

    st.rho.topLeftCorner(dim_, dim_) = work_[3];
    st.rho.bottomRightCorner(dim_, dim_) = work_[4];
    st.rho.topRightCorner(dim_, dim_) = work_[5];
    st.rho.bottomLeftCorner(dim_, dim_) = work_[5].adjoint();

    stats_.hermiticity_error = std::max((work_[3] - work_[3].adjoint()).cwiseAbs().maxCoeff(),
                                        (work_[4] - work_[4].adjoint()).cwiseAbs().maxCoeff());
    const double tr = st.rho.trace().real();
    double ito = eta * (dW * dW - dt) * (l2dl2 - 0.25 * m * m);
    if (dW != 0.0 && eta > 0.0) ito += cross_term(uu, dd, se * dW, m);
    stats_.raw_trace_error = std::abs(tr - 1.0);
    stats_.trace_error = std::abs(tr - 1.0 - ito);
    if (stats_.trace_error > 1e-3)
      throw StepSizeError("sme_step: trace drifted by " + std::to_string(stats_.trace_error) + "; reduce dt");
    st.rho = 0.5 * (st.rho + st.rho.adjoint().eval());
    st.rho /= tr;

    rotate(st.rho, 0.5 * dt);
    st.t += dt;
  }

  // 2 Re tr(D rho S^dag) over the spin blocks; D = M - I - S is the drift part
  // and S = noise (L2 - m/2)
  double cross_term(const CMatrix& uu, const CMatrix& dd, double noise, double m) {
    auto& x = centred_l2_;
    x = ops_.L2b;
    for (auto& v : x.diag[2]) v -= 0.5 * m;
    double acc = 0.0;
    for (int s = 0; s < 2; ++s) {
      auto& d = drift_part_;
      d = kraus_[s];
      for (int o = -2; o <= 2; ++o)
        for (int i = 0; i < dim_; ++i) d.diag[o + 2][i] -= noise * x.diag[o + 2][i];
      for (auto& v : d.diag[2]) v -= 1.0;
      acc += 2.0 * noise * detail::banded_sandwich_trace(d, s == 0 ? uu : dd, x, 0).real();
    }
    return acc;
  }

  // out = I*diag_shift + dt (K_s - i f Z / hbar) + l2_coeff L2; the drive enters H as -f Z
  void kraus_operator(BandedOp& out, const BandedOp& k, double f_t, double l2_coeff, double diag_shift,
                      double dt) const {
    out.dim = dim_;
    const cplx c(0.0, dt * f_t / hbar);
    for (int o = -2; o <= 2; ++o) {
      auto& d = out.diag[o + 2];
      d.resize(dim_);
      for (int i = 0; i < dim_; ++i) {
        d[i] = dt * k.diag[o + 2][i] + l2_coeff * ops_.L2b.diag[o + 2][i];
        if (o == 1 || o == -1) d[i] += c * ops_.Zb.diag[o + 2][i];
      }
    }
    for (auto& v : out.diag[2]) v += diag_shift;
  }

  // out += scale * A X; plain real arithmetic so the loop vectorises
  void left(const BandedOp& a, const CMatrix& x, CMatrix& out, cplx scale = 1.0) {
    const int n = a.dim;
    for (int o = -2; o <= 2; ++o) {
      if (!a.has(o)) continue;
      const int lo = std::max(0, -o), hi = std::min(n, n - o);
      for (int i = 0; i < n; ++i) {
        const cplx v = scale * a.diag[o + 2][i];
        diag_re_[i] = v.real();
        diag_im_[i] = v.imag();
      }
      const double* dr = diag_re_.data();
      const double* di = diag_im_.data();
      for (int j = 0; j < n; ++j) {
        const double* xc = reinterpret_cast<const double*>(x.col(j).data());
        double* oc = reinterpret_cast<double*>(out.col(j).data());
        for (int i = lo; i < hi; ++i) {
          const double xr = xc[2 * (i + o)], xi = xc[2 * (i + o) + 1];
          oc[2 * i] += dr[i] * xr - di[i] * xi;
          oc[2 * i + 1] += dr[i] * xi + di[i] * xr;
        }
      }
    }
  }

  // out += X B^dag
  static void right_adj(const CMatrix& x, const BandedOp& b, CMatrix& out, cplx scale = 1.0) {
    const int n = b.dim;
    for (int o = -2; o <= 2; ++o) {
      if (!b.has(o)) continue;
      const cplx* d = b.diag[o + 2].data();
      const int lo = std::max(0, -o), hi = std::min(n, n - o);
      // (X B^dag)(:, j) += conj(B(j, j + o)) X(:, j + o)
      for (int j = lo; j < hi; ++j) out.col(j).noalias() += (scale * std::conj(d[j])) * x.col(j + o);
    }
  }

  // out = M_s X M_s2^dag + dt (L1 X L1^dag + unmeasured L2 X L2^dag + kappa X_flipped)
  template <class Other>
  void block(const CMatrix& x, const Other& flipped, int s, int s2, double dt, double unmeasured, CMatrix& out) {
    const auto& p = ops_.params;
    auto& tmp = work_[6];
    out.setZero();
    tmp.setZero();
    left(kraus_[s], x, tmp);
    right_adj(tmp, kraus_[s2], out);
    tmp.setZero();
    left(ops_.L1b, x, tmp);
    right_adj(tmp, ops_.L1b, out, dt);
    if (unmeasured > 0.0) {
      tmp.setZero();
      left(ops_.L2b, x, tmp);
      right_adj(tmp, ops_.L2b, out, unmeasured * dt);
    }
    if (p.kappa_s > 0.0) out.noalias() += (p.kappa_s * dt) * flipped;
  }

  void rotate(CMatrix& rho, double h) {
    if (h != phase_step_) {
      phase_step_ = h;
      phases_.resize(dim_, dim_);
      for (int j = 0; j < dim_; ++j)
        for (int i = 0; i < dim_; ++i) phases_(i, j) = std::polar(1.0, -(ops_.h0(i) - ops_.h0(j)) * h / hbar);
    }
    for (int bj = 0; bj < 2; ++bj)
      for (int bi = 0; bi < 2; ++bi) rho.block(bi * dim_, bj * dim_, dim_, dim_).array() *= phases_.array();
  }

  const OperatorSet& ops_;
  int dim_;
  std::array<CMatrix, 7> work_;
  std::array<BandedOp, 2> kraus_;
  BandedOp centred_l2_, drift_part_;
  std::vector<double> diag_re_, diag_im_;
  CMatrix phases_;
  double phase_step_ = -1.0;
  SmeStepStats stats_;
};

/// One SME step; dW is the increment shared with the photocurrent.
inline DensityState sme_step(DensityState st, const OperatorSet& ops, double f_t, double dt, double dW) {
  SmeIntegrator integ(ops);
  integ.step(st, f_t, dt, dW);
  return st;
}

}  // namespace oscar
