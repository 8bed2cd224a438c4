#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <sstream>
#include <string>

#include "hopf/common.hpp"

namespace hopf {

using complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

/// Hamiltonian coefficient vector u(k); the band gap is 2 * omega * |u|.
using CoeffVector = Vec3;
/// Pauli expectation values (sx, sy, sz) of a two-level state.
using BlochVector = Vec3;
using R3Point = Vec3;
/// (Re eta_up, Im eta_up, Re eta_down, Im eta_down).
using S3Point = Vec4;
/// Two-level state (a_up, a_down); |0> of the NV spin is identified with spin-up.
using Spinor = Eigen::Vector2cd;
using DensityMatrix = Eigen::Matrix2cd;

/// Below this |u| the two bands touch and no ground state is defined.
inline constexpr double kGapTolerance = 1e-12;
/// Stereographic charts refuse points closer than this to their pole (in 1 + eta.pole).
inline constexpr double kPoleTolerance = 1e-9;

struct HopfParams {
  double h = 2.0;
  /// Energy unit (angular frequency); scales eigenvalues, never topology.
  double omega = 1.0;

  void validate() const {
    require(std::isfinite(h), "h must be finite");
    require(std::isfinite(omega) && omega > 0.0, "omega must be positive");
  }
};

/// Reduces an angle into [0, 2pi).
inline double wrap_angle(double k) {
  double r = std::fmod(k, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

struct MomentumPoint {
  double kx = 0.0;
  double ky = 0.0;
  double kz = 0.0;

  MomentumPoint() = default;
  MomentumPoint(double x, double y, double z) : kx(x), ky(y), kz(z) {}

  [[nodiscard]] MomentumPoint reduced() const {
    return {wrap_angle(kx), wrap_angle(ky), wrap_angle(kz)};
  }
  [[nodiscard]] Vec3 vec() const { return {kx, ky, kz}; }
  static MomentumPoint from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
  /// k = 2pi * (fx, fy, fz).
  static MomentumPoint from_fractions(double fx, double fy, double fz) {
    return {kTwoPi * fx, kTwoPi * fy, kTwoPi * fz};
  }
};

inline std::string describe(const MomentumPoint& k) {
  std::ostringstream os;
  os.precision(17);
  os << "k=(" << k.kx << ", " << k.ky << ", " << k.kz << ")";
  return os.str();
}

/// C(k) = cos kx + cos ky + cos kz + h.
inline double mass_term(const MomentumPoint& k, const HopfParams& p) {
  return std::cos(k.kx) + std::cos(k.ky) + std::cos(k.kz) + p.h;
}

inline CoeffVector u_of_k(const MomentumPoint& k, const HopfParams& p) {
  const double sx = std::sin(k.kx);
  const double sy = std::sin(k.ky);
  const double sz = std::sin(k.kz);
  const double c = mass_term(k, p);
  return {2.0 * (sx * sz + c * sy), 2.0 * (c * sx - sy * sz), sx * sx + sy * sy - sz * sz - c * c};
}

/// Eigenvalues are -/+ omega*|u|; the gap is twice that.
inline double energy_gap(const MomentumPoint& k, const HopfParams& p) {
  return 2.0 * p.omega * u_of_k(k, p).norm();
}

inline Eigen::Matrix2cd hamiltonian(const MomentumPoint& k, const HopfParams& p) {
  const CoeffVector u = u_of_k(k, p);
  Eigen::Matrix2cd H;
  H << complex(u.z(), 0.0), complex(u.x(), -u.y()),
       complex(u.x(), u.y()), complex(-u.z(), 0.0);
  return p.omega * H;
}

/// Fixes the global phase so the larger amplitude is real and positive
/// (ties go to a_up). Input must be nonzero.
inline Spinor fix_gauge(Spinor s) {
  s.normalize();
  const complex pivot = std::abs(s(0)) >= std::abs(s(1)) ? s(0) : s(1);
  const complex phase = std::conj(pivot) / std::abs(pivot);
  s *= phase;
  // kill the rounding residue of the pivot's imaginary part
  if (std::abs(s(0)) >= std::abs(s(1))) {
    s(0) = complex(s(0).real(), 0.0);
  } else {
    s(1) = complex(s(1).real(), 0.0);
  }
  return s;
}

/// Lower-band eigenvector of u.sigma for an arbitrary nonzero u.
inline Spinor lower_eigenvector(const CoeffVector& u) {
  const double r = u.norm();
  if (!(r >= kGapTolerance)) fail(ErrorKind::GaplessPoint, "|u| below gap tolerance");
  // Two algebraically equivalent kernels of (u.sigma + r); pick the one
  // that is not a difference of nearly equal numbers.
  Spinor v;
  if (u.z() <= 0.0) {
    v << complex(r - u.z(), 0.0), complex(-u.x(), -u.y());
  } else {
    v << complex(u.x(), -u.y()), complex(-r - u.z(), 0.0);
  }
  return fix_gauge(v);
}

inline Spinor ground_state(const MomentumPoint& k, const HopfParams& p) {
  const CoeffVector u = u_of_k(k, p);
  if (!(u.norm() >= kGapTolerance)) fail(ErrorKind::GaplessPoint, "gap closes at " + describe(k));
  return lower_eigenvector(u);
}

/// Ground-state spin orientation S = -u/|u|.
inline BlochVector bloch_ground(const MomentumPoint& k, const HopfParams& p) {
  const CoeffVector u = u_of_k(k, p);
  const double r = u.norm();
  if (!(r >= kGapTolerance)) fail(ErrorKind::GaplessPoint, "gap closes at " + describe(k));
  return -u / r;
}

inline BlochVector bloch_vector(const Spinor& s) {
  const complex c = std::conj(s(0)) * s(1);
  return {2.0 * c.real(), 2.0 * c.imag(), std::norm(s(0)) - std::norm(s(1))};
}

inline BlochVector bloch_vector(const DensityMatrix& rho) {
  return {2.0 * rho(0, 1).real(), -2.0 * rho(0, 1).imag(), (rho(0, 0) - rho(1, 1)).real()};
}

inline DensityMatrix density_from_bloch(const BlochVector& r) {
  DensityMatrix rho;
  rho << complex(0.5 * (1.0 + r.z()), 0.0), complex(0.5 * r.x(), -0.5 * r.y()),
         complex(0.5 * r.x(), 0.5 * r.y()), complex(0.5 * (1.0 - r.z()), 0.0);
  return rho;
}

inline DensityMatrix projector(const Spinor& s) { return s * s.adjoint(); }

/// The complex pair (eta_up, eta_down) produced by g before normalization.
struct EtaPair {
  complex up;
  complex down;
};

inline EtaPair eta_of_k(const MomentumPoint& k, const HopfParams& p) {
  return {complex(std::sin(k.kx), -std::sin(k.ky)), complex(std::sin(k.kz), -mass_term(k, p))};
}

/// g : T^3 -> S^3, normalized.
inline S3Point map_g(const MomentumPoint& k, const HopfParams& p) {
  const EtaPair eta = eta_of_k(k, p);
  S3Point v(eta.up.real(), eta.up.imag(), eta.down.real(), eta.down.imag());
  const double norm = v.norm();
  if (!(norm > 0.0)) fail(ErrorKind::DegenerateEta, "eta vanishes at " + describe(k));
  return v / norm;
}

/// Hopf map f : C^2 -> R^3, ux + i uy = 2 eta_up conj(eta_down), uz = |eta_up|^2 - |eta_down|^2.
inline CoeffVector hopf_f(complex eta_up, complex eta_down) {
  const complex t = 2.0 * eta_up * std::conj(eta_down);
  return {t.real(), t.imag(), std::norm(eta_up) - std::norm(eta_down)};
}

inline CoeffVector hopf_f(const S3Point& eta) {
  return hopf_f(complex(eta(0), eta(1)), complex(eta(2), eta(3)));
}

/// Stereographic charts of S^3. South projects from eta4 = -1 with
/// (x,y,z) = (eta1,eta2,eta3)/(1+eta4); North projects from eta4 = +1 with
/// (eta1, eta2, -eta3)/(1-eta4), i.e. the South chart after the rotation
/// (eta3, eta4) -> (-eta3, -eta4), so both charts induce the same orientation.
enum class Chart { South, North };

inline std::string_view to_string(Chart c) { return c == Chart::South ? "south" : "north"; }

/// Positive away from the chart's pole; zero on it.
inline double chart_margin(const S3Point& eta, Chart chart) {
  return chart == Chart::South ? 1.0 + eta(3) : 1.0 - eta(3);
}

inline R3Point stereographic_embed(const S3Point& eta, Chart chart) {
  const double margin = chart_margin(eta, chart);
  if (!(margin > kPoleTolerance)) {
    fail(ErrorKind::PoleSingular,
         std::string("point within pole tolerance of the ") + std::string(to_string(chart)) + " chart pole");
  }
  if (chart == Chart::South) return R3Point(eta(0), eta(1), eta(2)) / margin;
  return R3Point(eta(0), eta(1), -eta(2)) / margin;
}

/// The standard chart (x,y,z) = (eta1,eta2,eta3)/(1+eta4).
inline R3Point stereographic_embed(const S3Point& eta) { return stereographic_embed(eta, Chart::South); }

}  // namespace hopf
