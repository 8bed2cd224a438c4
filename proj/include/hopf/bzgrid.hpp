#pragma once

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hopf/common.hpp"
#include "hopf/model.hpp"

namespace hopf {

/// Uniform periodic n x n x n mesh with sites k_J = 2pi (jx, jy, jz) / n.
struct MeshSpec {
  int n = 10;

  explicit MeshSpec(int points = 10) : n(points) {
    require(n >= 4, "mesh needs at least 4 points per axis");
  }

  [[nodiscard]] std::size_t sites() const { return std::size_t(n) * n * n; }
  [[nodiscard]] double spacing() const { return kTwoPi / n; }

  /// Row-major flat index, x slowest. Indices are taken mod n.
  [[nodiscard]] std::size_t index(int jx, int jy, int jz) const {
    return (std::size_t(wrap(jx)) * n + wrap(jy)) * n + wrap(jz);
  }
  [[nodiscard]] std::size_t index(const std::array<int, 3>& j) const { return index(j[0], j[1], j[2]); }

  [[nodiscard]] std::array<int, 3> coords(std::size_t flat) const {
    const int jz = int(flat % n);
    const int jy = int((flat / n) % n);
    const int jx = int(flat / (std::size_t(n) * n));
    return {jx, jy, jz};
  }

  /// Flat index of the neighbor one step forward along axis (0, 1, 2).
  [[nodiscard]] std::size_t step(std::size_t flat, int axis, int delta = 1) const {
    auto j = coords(flat);
    j[axis] += delta;
    return index(j);
  }

  [[nodiscard]] MomentumPoint momentum(std::size_t flat) const {
    const auto j = coords(flat);
    return {kTwoPi * j[0] / n, kTwoPi * j[1] / n, kTwoPi * j[2] / n};
  }

  [[nodiscard]] int wrap(int j) const {
    const int r = j % n;
    return r < 0 ? r + n : r;
  }

  friend bool operator==(const MeshSpec&, const MeshSpec&) = default;
};

enum class Provenance { Analytic, SimulatedExperiment };

inline std::string_view to_string(Provenance p) {
  return p == Provenance::Analytic ? "analytic" : "simulated-experiment";
}

inline void check_density_matrix(const DensityMatrix& rho, double tol = 1e-9) {
  require((rho - rho.adjoint()).cwiseAbs().maxCoeff() <= tol, "density matrix not Hermitian");
  require(std::abs(rho.trace() - complex(1.0, 0.0)) <= tol, "density matrix trace differs from 1");
  Eigen::SelfAdjointEigenSolver<DensityMatrix> es(rho, Eigen::EigenvaluesOnly);
  require(es.eigenvalues()(0) >= -tol, "density matrix not positive semidefinite");
}

/// Eigenvector of the largest eigenvalue, gauge-fixed like ground_state.
inline Spinor dominant_eigenvector(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<DensityMatrix> es(rho);
  return fix_gauge(es.eigenvectors().col(1));
}

/// Ground states (or reconstructed density matrices) on every mesh site.
class StateField {
 public:
  using Entries = std::variant<std::vector<Spinor>, std::vector<DensityMatrix>>;

  StateField(MeshSpec mesh, HopfParams params, Provenance provenance, std::vector<Spinor> spinors)
      : mesh_(mesh), params_(params), provenance_(provenance), entries_(std::move(spinors)) {
    require(std::get<0>(entries_).size() == mesh_.sites(), "spinor count does not match mesh");
  }

  StateField(MeshSpec mesh, HopfParams params, Provenance provenance, std::vector<DensityMatrix> rhos)
      : mesh_(mesh), params_(params), provenance_(provenance), entries_(std::move(rhos)) {
    const auto& v = std::get<1>(entries_);
    require(v.size() == mesh_.sites(), "density matrix count does not match mesh");
    for (const auto& rho : v) check_density_matrix(rho);
  }

  [[nodiscard]] const MeshSpec& mesh() const { return mesh_; }
  [[nodiscard]] const HopfParams& params() const { return params_; }
  [[nodiscard]] Provenance provenance() const { return provenance_; }
  [[nodiscard]] bool is_pure() const { return entries_.index() == 0; }
  [[nodiscard]] std::size_t size() const { return mesh_.sites(); }

  [[nodiscard]] std::span<const Spinor> spinors() const { return std::get<0>(entries_); }
  [[nodiscard]] std::span<const DensityMatrix> density_matrices() const { return std::get<1>(entries_); }

  /// A pure state per site; density matrices are reduced to their dominant eigenvector.
  [[nodiscard]] Spinor state(std::size_t site) const {
    if (is_pure()) return std::get<0>(entries_)[site];
    return dominant_eigenvector(std::get<1>(entries_)[site]);
  }

  /// All sites as pure states, in site order.
  [[nodiscard]] std::vector<Spinor> pure_states(unsigned threads = 1) const {
    if (is_pure()) return std::get<0>(entries_);
    std::vector<Spinor> out(size());
    parallel_for(size(), threads, [&](std::size_t i) { out[i] = state(i); });
    return out;
  }

  [[nodiscard]] BlochVector bloch(std::size_t site) const {
    if (is_pure()) return bloch_vector(std::get<0>(entries_)[site]);
    return bloch_vector(std::get<1>(entries_)[site]);
  }

 private:
  MeshSpec mesh_;
  HopfParams params_;
  Provenance provenance_;
  Entries entries_;
};

inline StateField sample_state_field(const HopfParams& p, MeshSpec mesh, unsigned threads = 1) {
  p.validate();
  std::vector<Spinor> states(mesh.sites());
  parallel_for(states.size(), threads, [&](std::size_t i) {
    const MomentumPoint k = mesh.momentum(i);
    const auto j = mesh.coords(i);
    if (!(u_of_k(k, p).norm() >= kGapTolerance)) {
      fail(ErrorKind::GaplessPoint, "gap closes at site (" + std::to_string(j[0]) + ", " +
                                        std::to_string(j[1]) + ", " + std::to_string(j[2]) + "), " +
                                        describe(k));
    }
    states[i] = ground_state(k, p);
  });
  return {mesh, p, Provenance::Analytic, std::move(states)};
}

enum class Axis { X = 0, Y = 1, Z = 2 };

inline std::string_view to_string(Axis a) {
  constexpr std::array<std::string_view, 3> names{"x", "y", "z"};
  return names[static_cast<int>(a)];
}

/// Non-owning view of the n x n layer with fixed coordinate along `axis`.
/// The field must outlive the slice. Sites are row-major in the two
/// remaining axes taken in cyclic order (axis+1, axis+2).
class SliceField {
 public:
  SliceField(const StateField& field, Axis axis, int layer) : field_(&field), axis_(axis), layer_(layer) {
    const int n = field.mesh().n;
    if (layer < 0 || layer >= n) {
      fail(ErrorKind::IndexOutOfRange,
           "layer " + std::to_string(layer) + " outside [0, " + std::to_string(n) + ")");
    }
    sites_.reserve(std::size_t(n) * n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) sites_.push_back(site_of(a, b));
    }
  }

  [[nodiscard]] const StateField& field() const { return *field_; }
  [[nodiscard]] Axis axis() const { return axis_; }
  [[nodiscard]] int layer() const { return layer_; }
  [[nodiscard]] int n() const { return field_->mesh().n; }
  [[nodiscard]] std::span<const std::size_t> sites() const { return sites_; }
  /// The two in-plane axes (first, second), right-handed with the normal.
  [[nodiscard]] std::array<int, 2> plane_axes() const {
    const int a = static_cast<int>(axis_);
    return {(a + 1) % 3, (a + 2) % 3};
  }

  /// Flat StateField index of in-plane coordinates (a, b), periodic.
  [[nodiscard]] std::size_t site_of(int a, int b) const {
    std::array<int, 3> j{};
    const auto [pa, pb] = plane_axes();
    j[static_cast<int>(axis_)] = layer_;
    j[pa] = a;
    j[pb] = b;
    return field_->mesh().index(j);
  }

 private:
  const StateField* field_;
  Axis axis_;
  int layer_;
  std::vector<std::size_t> sites_;
};

inline SliceField slice_field(const StateField& field, Axis axis, int layer) { return {field, axis, layer}; }

/// Zonal equal-area partition of S^2: `bands` latitude bands of equal area
/// (uniform in z) each split into `sectors` equal longitude cells.
struct SphereBinning {
  int bands = 1;
  int sectors = 1;

  /// Picks bands as the largest divisor of `bins` not above sqrt(bins),
  /// so the band and sector counts stay as close as possible.
  static SphereBinning for_bins(int bins) {
    require(bins >= 8, "coverage needs at least 8 bins");
    int bands = 1;
    for (int d = 1; d * d <= bins; ++d) {
      if (bins % d == 0) bands = d;
    }
    return {bands, bins / bands};
  }

  [[nodiscard]] int cells() const { return bands * sectors; }

  [[nodiscard]] int cell_of(const BlochVector& s) const {
    const double z = std::clamp(s.z(), -1.0, 1.0);
    int band = int(std::floor((z + 1.0) * 0.5 * bands));
    band = std::clamp(band, 0, bands - 1);
    double phi = std::atan2(s.y(), s.x());
    if (phi < 0.0) phi += kTwoPi;
    int sector = int(std::floor(phi / kTwoPi * sectors));
    sector = std::clamp(sector, 0, sectors - 1);
    return band * sectors + sector;
  }
};

/// Fraction of equal-area sphere cells hit by at least one sample.
inline double coverage_fraction(std::span<const BlochVector> samples, int bins) {
  if (samples.empty()) fail(ErrorKind::EmptyInput, "coverage of an empty sample set");
  const SphereBinning binning = SphereBinning::for_bins(bins);
  std::vector<char> hit(std::size_t(binning.cells()), 0);
  for (const auto& s : samples) {
    require(std::abs(s.norm() - 1.0) <= 1e-6, "coverage samples must be unit vectors");
    hit[std::size_t(binning.cell_of(s))] = 1;
  }
  return double(std::count(hit.begin(), hit.end(), 1)) / binning.cells();
}

inline std::vector<BlochVector> bloch_vectors(const StateField& field) {
  std::vector<BlochVector> out(field.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = field.bloch(i);
  return out;
}

inline std::vector<BlochVector> bloch_vectors(const SliceField& slice) {
  std::vector<BlochVector> out;
  out.reserve(slice.sites().size());
  for (auto site : slice.sites()) out.push_back(slice.field().bloch(site));
  return out;
}

}  // namespace hopf
