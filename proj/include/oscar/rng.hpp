#pragma once

// Counter-based normal variates. Every Wiener increment is a pure function of
// (master seed, trajectory index, step index), so ensembles are reproducible
// regardless of scheduling and the SME oracle can replay the exact increments
// the Gaussian run consumed.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>

namespace oscar {

/// Philox4x32-10 (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t key)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Block operator()(Block ctr) const {
    auto k = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, k);
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    return ctr;
  }

 private:
  static Block single_round(const Block& c, const std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }

  std::array<std::uint32_t, 2> key_;
};

/// Stream of standard normals for one trajectory; index = step counter.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t trajectory, std::uint32_t domain = 0)
      : gen_(seed), traj_(trajectory), domain_(domain) {}

  double operator()(std::uint64_t index) const {
    const auto b = gen_({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                         static_cast<std::uint32_t>(traj_),
                         static_cast<std::uint32_t>(traj_ >> 32) ^ (domain_ << 24)});
    // Box-Muller on two 53-bit uniforms; u1 in (0, 1]
    const double u1 = (static_cast<double>(to53(b[0], b[1])) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(to53(b[2], b[3])) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  static std::uint64_t to53(std::uint32_t hi, std::uint32_t lo) {
    return ((std::uint64_t{hi} << 32) | lo) >> 11;
  }

  Philox4x32 gen_;
  std::uint64_t traj_;
  std::uint32_t domain_;
};

/// Deterministic bridge variate for step refinement: keyed on the bits of the
/// increment being split and the refinement depth.
inline double bridge_normal(double dW, int depth) {
  NormalStream s(std::bit_cast<std::uint64_t>(dW), static_cast<std::uint64_t>(depth), 0x5Bu);
  return s(0);
}

}  // namespace oscar
