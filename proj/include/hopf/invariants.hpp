#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hopf/bzgrid.hpp"
#include "hopf/common.hpp"
#include "hopf/model.hpp"

namespace hopf {

/// Neighbouring states with smaller overlap than this are treated as orthogonal.
inline constexpr double kOverlapTolerance = 1e-8;

inline complex u1_link(const Spinor& a, const Spinor& b, double tol = kOverlapTolerance) {
  const complex overlap = a.dot(b);  // <a|b>, Eigen conjugates the left operand
  const double mag = std::abs(overlap);
  if (!(mag > tol)) fail(ErrorKind::OrthogonalNeighbors, "overlap below tolerance");
  return overlap / mag;
}

inline complex u1_link(const DensityMatrix& a, const DensityMatrix& b, double tol = kOverlapTolerance) {
  return u1_link(dominant_eigenvector(a), dominant_eigenvector(b), tol);
}

/// Per-axis cyclic partner: F_mu lives on the plaquette spanned by
/// (mu+1, mu+2), so that (mu, nu, tau) is an even permutation.
inline constexpr std::array<int, 2> plaquette_axes(int mu) { return {(mu + 1) % 3, (mu + 2) % 3}; }

/// U(1) links U_nu(J) = <psi_J|psi_{J+nu}> / |...| for nu = x, y, z.
struct LinkField {
  MeshSpec mesh;
  std::array<std::vector<complex>, 3> links;
};

inline LinkField compute_links(const MeshSpec& mesh, std::span<const Spinor> states, unsigned threads = 1,
                               double tol = kOverlapTolerance) {
  require(states.size() == mesh.sites(), "state count does not match mesh");
  LinkField out{mesh, {}};
  for (auto& l : out.links) l.resize(mesh.sites());
  parallel_for(mesh.sites(), threads, [&](std::size_t site) {
    for (int nu = 0; nu < 3; ++nu) {
      const std::size_t next = mesh.step(site, nu);
      const complex overlap = states[site].dot(states[next]);
      const double mag = std::abs(overlap);
      if (!(mag > tol)) {
        const auto j = mesh.coords(site);
        fail(ErrorKind::OrthogonalNeighbors,
             "link along " + std::string(to_string(Axis(nu))) + " from site (" + std::to_string(j[0]) + ", " +
                 std::to_string(j[1]) + ", " + std::to_string(j[2]) + ") has overlap " + std::to_string(mag) +
                 "; refine the mesh or move h away from a transition");
      }
      out.links[nu][site] = overlap / mag;
    }
  });
  return out;
}

inline LinkField compute_links(const StateField& field, unsigned threads = 1, double tol = kOverlapTolerance) {
  const std::vector<Spinor> states = field.pure_states(threads);
  return compute_links(field.mesh(), states, threads, tol);
}

/// Plaquette flux in units of 2pi, principal branch (-1/2, 1/2].
inline double plaquette_flux(complex u_nu, complex u_tau_shifted, complex u_nu_shifted, complex u_tau) {
  return std::arg(u_nu * u_tau_shifted * std::conj(u_nu_shifted) * std::conj(u_tau)) / kTwoPi;
}

/// Lattice Berry curvature: flux[mu][J] through the plaquette at J normal to mu.
struct CurvatureField {
  MeshSpec mesh;
  std::array<std::vector<double>, 3> flux;

  /// Total flux through the layer j_mu = layer, i.e. that slice's Chern number before rounding.
  [[nodiscard]] double layer_flux(int mu, int layer) const {
    double total = 0.0;
    const int n = mesh.n;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        std::array<int, 3> j{};
        const auto [nu, tau] = plaquette_axes(mu);
        j[mu] = layer;
        j[nu] = a;
        j[tau] = b;
        total += flux[mu][mesh.index(j)];
      }
    }
    return total;
  }

  /// Slice Chern numbers for every layer normal to each axis.
  [[nodiscard]] std::array<std::vector<int>, 3> chern_numbers() const {
    std::array<std::vector<int>, 3> out;
    for (int mu = 0; mu < 3; ++mu) {
      out[mu].resize(std::size_t(mesh.n));
      for (int l = 0; l < mesh.n; ++l) out[mu][l] = int(std::lround(layer_flux(mu, l)));
    }
    return out;
  }
};

inline CurvatureField berry_curvature(const LinkField& links, unsigned threads = 1) {
  const MeshSpec& mesh = links.mesh;
  CurvatureField out{mesh, {}};
  for (auto& f : out.flux) f.resize(mesh.sites());
  parallel_for(mesh.sites(), threads, [&](std::size_t site) {
    for (int mu = 0; mu < 3; ++mu) {
      const auto [nu, tau] = plaquette_axes(mu);
      out.flux[mu][site] = plaquette_flux(links.links[nu][site], links.links[tau][mesh.step(site, nu)],
                                          links.links[nu][mesh.step(site, tau)], links.links[tau][site]);
    }
  });
  return out;
}

inline CurvatureField berry_curvature(const StateField& field, unsigned threads = 1) {
  return berry_curvature(compute_links(field, threads), threads);
}

/// Difference operator used to invert curl A = F in Fourier space.
///  - Central: symbol i sin(q). Default; its quadrature error at n = 10 is
///    a few percent, in line with the accuracy quoted for tomographic data.
///  - Exact: forward-difference symbol exp(iq) - 1. Lattice curl of A
///    reproduces F to rounding, but chi converges more slowly (about 12% low
///    at n = 10).
enum class ConnectionScheme { Central, Exact };

inline std::string_view to_string(ConnectionScheme s) { return s == ConnectionScheme::Central ? "central" : "exact"; }

struct ConnectionField {
  MeshSpec mesh;
  ConnectionScheme scheme = ConnectionScheme::Central;
  std::array<std::vector<double>, 3> a;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// In-place 3D DFT on an n^3 row-major buffer (x slowest). sign is FFTW_FORWARD or FFTW_BACKWARD.
inline void dft3(std::vector<complex>& data, int n, int sign) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_3d(n, n, n, ptr, ptr, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

inline std::array<complex, 3> symbol(const std::array<int, 3>& m, int n, ConnectionScheme scheme) {
  std::array<complex, 3> d{};
  for (int ax = 0; ax < 3; ++ax) {
    const double q = kTwoPi * m[ax] / n;
    d[ax] = scheme == ConnectionScheme::Exact ? complex(std::cos(q) - 1.0, std::sin(q)) : complex(0.0, std::sin(q));
  }
  return d;
}

inline std::array<complex, 3> cross(const std::array<complex, 3>& a, const std::array<complex, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

}  // namespace detail

/// Coulomb-gauge solve of curl A = F. Fails with NonzeroNetFlux when any
/// layer carries a nonzero Chern number, since no periodic A exists then.
inline ConnectionField berry_connection(const CurvatureField& F, ConnectionScheme scheme = ConnectionScheme::Central) {
  const MeshSpec& mesh = F.mesh;
  const int n = mesh.n;
  for (int mu = 0; mu < 3; ++mu) {
    for (int l = 0; l < n; ++l) {
      const double flux = F.layer_flux(mu, l);
      if (std::lround(flux) != 0) {
        fail(ErrorKind::NonzeroNetFlux, "layer " + std::string(to_string(Axis(mu))) + "=" + std::to_string(l) +
                                            " carries Chern number " + std::to_string(std::lround(flux)));
      }
    }
  }

  const std::size_t N = mesh.sites();
  std::array<std::vector<complex>, 3> Fh;
  for (int mu = 0; mu < 3; ++mu) {
    Fh[mu].resize(N);
    for (std::size_t i = 0; i < N; ++i) Fh[mu][i] = F.flux[mu][i];
    detail::dft3(Fh[mu], n, FFTW_FORWARD);
  }

  std::array<std::vector<complex>, 3> Ah;
  for (auto& v : Ah) v.assign(N, complex(0.0, 0.0));
  for (std::size_t i = 0; i < N; ++i) {
    const auto d = detail::symbol(mesh.coords(i), n, scheme);
    const double d2 = std::norm(d[0]) + std::norm(d[1]) + std::norm(d[2]);
    if (d2 < 1e-24) continue;  // zero mode (and central-scheme Nyquist corners) stay zero
    const std::array<complex, 3> dbar{std::conj(d[0]), std::conj(d[1]), std::conj(d[2])};
    const auto c = detail::cross(dbar, {Fh[0][i], Fh[1][i], Fh[2][i]});
    for (int mu = 0; mu < 3; ++mu) Ah[mu][i] = -c[mu] / d2;
  }

  ConnectionField out{mesh, scheme, {}};
  for (int mu = 0; mu < 3; ++mu) {
    detail::dft3(Ah[mu], n, FFTW_BACKWARD);
    out.a[mu].resize(N);
    for (std::size_t i = 0; i < N; ++i) out.a[mu][i] = Ah[mu][i].real() / double(N);
  }
  return out;
}

/// Lattice curl matching the scheme: forward differences for Exact, central for Central.
inline std::array<std::vector<double>, 3> lattice_curl(const ConnectionField& A) {
  const MeshSpec& mesh = A.mesh;
  std::array<std::vector<double>, 3> out;
  auto diff = [&](const std::vector<double>& f, std::size_t site, int axis) {
    if (A.scheme == ConnectionScheme::Exact) return f[mesh.step(site, axis)] - f[site];
    return 0.5 * (f[mesh.step(site, axis)] - f[mesh.step(site, axis, -1)]);
  };
  for (int mu = 0; mu < 3; ++mu) {
    const auto [nu, tau] = plaquette_axes(mu);
    out[mu].resize(mesh.sites());
    for (std::size_t s = 0; s < mesh.sites(); ++s) out[mu][s] = diff(A.a[tau], s, nu) - diff(A.a[nu], s, tau);
  }
  return out;
}

/// Site divergence adjoint to the curl's gradient: backward differences
/// for Exact (A_nu(J) - A_nu(J - nu)), central for Central.
inline std::vector<double> lattice_divergence(const ConnectionField& A) {
  const MeshSpec& mesh = A.mesh;
  std::vector<double> out(mesh.sites(), 0.0);
  for (std::size_t s = 0; s < mesh.sites(); ++s) {
    double div = 0.0;
    for (int nu = 0; nu < 3; ++nu) {
      const auto& f = A.a[nu];
      div += A.scheme == ConnectionScheme::Exact ? f[s] - f[mesh.step(s, nu, -1)]
                                                 : 0.5 * (f[mesh.step(s, nu)] - f[mesh.step(s, nu, -1)]);
    }
    out[s] = div;
  }
  return out;
}

/// Quantized target: -2 for |h| < 1, 1 for 1 < |h| < 3, 0 for |h| > 3;
/// empty at the transitions |h| in {1, 3}.
inline std::optional<int> expected_hopf_index(double h) {
  const double a = std::abs(h);
  if (a < 1.0) return -2;
  if (a > 1.0 && a < 3.0) return 1;
  if (a > 3.0) return 0;
  return std::nullopt;
}

struct IndexOptions {
  ConnectionScheme scheme = ConnectionScheme::Central;
  unsigned threads = 1;
};

struct HopfIndexResult {
  double chi = 0.0;
  int n = 0;
  double h = 0.0;
  int nearest_integer = 0;
  double deviation = 0.0;
  ConnectionScheme scheme = ConnectionScheme::Central;
  /// Slice Chern numbers per axis (x, y, z), n entries each.
  std::array<std::vector<int>, 3> chern_numbers;
};

/// chi = -sum_J F(k_J) . A(k_J), with F in flux/2pi per plaquette and A
/// from the lattice solve; no volume factor is needed in these units.
inline double chern_simons_sum(const CurvatureField& F, const ConnectionField& A) {
  double total = 0.0;
  for (int mu = 0; mu < 3; ++mu) {
    for (std::size_t s = 0; s < F.mesh.sites(); ++s) total += F.flux[mu][s] * A.a[mu][s];
  }
  return -total;
}

inline HopfIndexResult hopf_index(const StateField& field, const IndexOptions& options = {}) {
  const CurvatureField F = berry_curvature(field, options.threads);
  const ConnectionField A = berry_connection(F, options.scheme);
  HopfIndexResult r;
  r.chi = chern_simons_sum(F, A);
  r.n = field.mesh().n;
  r.h = field.params().h;
  r.nearest_integer = int(std::lround(r.chi));
  r.deviation = std::abs(r.chi - r.nearest_integer);
  r.scheme = options.scheme;
  r.chern_numbers = F.chern_numbers();
  return r;
}

/// Chern number of one closed 2D layer, straight from its states.
inline int chern_number(const SliceField& slice, double tol = kOverlapTolerance) {
  const int n = slice.n();
  const StateField& field = slice.field();
  std::vector<Spinor> states(std::size_t(n) * n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) states[std::size_t(a) * n + b] = field.state(slice.site_of(a, b));
  }
  auto at = [&](int a, int b) -> const Spinor& {
    return states[std::size_t((a % n + n) % n) * n + std::size_t((b % n + n) % n)];
  };
  double total = 0.0;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const complex ua = u1_link(at(a, b), at(a + 1, b), tol);
      const complex ub_shift = u1_link(at(a + 1, b), at(a + 1, b + 1), tol);
      const complex ua_shift = u1_link(at(a, b + 1), at(a + 1, b + 1), tol);
      const complex ub = u1_link(at(a, b), at(a, b + 1), tol);
      total += plaquette_flux(ua, ub_shift, ua_shift, ub);
    }
  }
  return int(std::lround(total));
}

struct ScalingRow {
  int n = 0;
  double chi = 0.0;
  double deviation = 0.0;
};

/// Finite-mesh estimates of chi against the quantized value, sorted by n.
inline std::vector<ScalingRow> scaling_study(double h, std::vector<int> ns, const IndexOptions& options = {}) {
  const auto target = expected_hopf_index(h);
  if (!target) fail(ErrorKind::GaplessPoint, "h=" + std::to_string(h) + " is a phase transition");
  std::sort(ns.begin(), ns.end());
  std::vector<ScalingRow> rows;
  for (int n : ns) {
    const StateField field = sample_state_field({h, 1.0}, MeshSpec(n), options.threads);
    const double chi = hopf_index(field, options).chi;
    rows.push_back({n, chi, std::abs(chi - *target)});
  }
  return rows;
}

}  // namespace hopf
