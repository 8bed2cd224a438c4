#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hopf/bzgrid.hpp"
#include "hopf/common.hpp"
#include "hopf/model.hpp"

namespace hopf {

/// Minimum vertex separation between two curves before linking is refused.
inline constexpr double kMinCurveSeparation = 1e-3;
/// Allowed Bloch-vector distance of a refined preimage vertex from its target.
inline constexpr double kCurveTolerance = 0.05;

/// Fixed spin orientation whose preimage is sought.
class SpinTarget {
 public:
  explicit SpinTarget(const BlochVector& s) : s_(s) {
    require(std::abs(s.norm() - 1.0) <= 1e-9, "spin target must be a unit vector");
  }
  static SpinTarget normalized(const BlochVector& v) {
    require(v.norm() > 0.0, "spin target must be nonzero");
    return SpinTarget(v.normalized());
  }

  [[nodiscard]] const BlochVector& direction() const { return s_; }

  /// Right-handed frame (e1, e2, s): the preimage is {n.e1 = 0, n.e2 = 0, n.s > 0}.
  [[nodiscard]] std::array<Vec3, 2> transverse_frame() const {
    const Eigen::Index least = [&] {
      Eigen::Index i;
      s_.cwiseAbs().minCoeff(&i);
      return i;
    }();
    const Vec3 axis = Vec3::Unit(least);
    const Vec3 e1 = axis.cross(s_).normalized();
    return {e1, s_.cross(e1)};
  }

 private:
  BlochVector s_;
};

enum class Coords { T3, R3 };

inline std::string_view to_string(Coords c) { return c == Coords::T3 ? "T3" : "R3"; }

/// Oriented closed curve. T3 vertices are reduced into [0, 2pi)^3.
struct Polyline {
  Coords coords = Coords::T3;
  bool closed = true;
  std::vector<Vec3> vertices;
  std::optional<BlochVector> target;
  std::optional<double> h;
  /// Stereographic chart used for R3 curves.
  std::optional<Chart> chart;

  [[nodiscard]] std::size_t size() const { return vertices.size(); }

  [[nodiscard]] Polyline reversed() const {
    Polyline r = *this;
    std::reverse(r.vertices.begin(), r.vertices.end());
    return r;
  }

  /// Inserts the midpoint of every edge (including the closing edge).
  [[nodiscard]] Polyline subdivided() const {
    Polyline r = *this;
    r.vertices.clear();
    const std::size_t m = vertices.size();
    for (std::size_t i = 0; i < m; ++i) {
      r.vertices.push_back(vertices[i]);
      if (closed || i + 1 < m) r.vertices.push_back(0.5 * (vertices[i] + vertices[(i + 1) % m]));
    }
    return r;
  }
};

/// Shortest displacement between two torus points.
inline Vec3 torus_delta(const Vec3& from, const Vec3& to) {
  Vec3 d = to - from;
  for (int i = 0; i < 3; ++i) d(i) -= kTwoPi * std::round(d(i) / kTwoPi);
  return d;
}

struct ContourOptions {
  int res = 64;
  double curve_tol = kCurveTolerance;
  unsigned threads = 1;
};

namespace detail {

/// Sub-cell shift of the marching grid. The model is symmetric under
/// k -> -k and exchanges of axes, so preimages often run through the
/// symmetric grid planes; a generic offset keeps them off grid edges.
inline constexpr std::array<double, 3> kGridOffset{0.2360679774997897, 0.3819660112501051, 0.1458980337503155};

struct Segment {
  std::uint64_t start_key;
  std::uint64_t end_key;
  Vec3 start;  // grid-index coordinates, possibly one cell outside [0, res)
};

inline Vec3 transverse_residual(const MomentumPoint& k, const HopfParams& p, const std::array<Vec3, 2>& frame) {
  const BlochVector n = bloch_ground(k, p);
  return {n.dot(frame[0]), n.dot(frame[1]), 0.0};
}

/// One Gauss-Newton step toward n(k).e1 = n(k).e2 = 0 (minimum-norm update).
inline Vec3 refine_vertex(const Vec3& k, const HopfParams& p, const std::array<Vec3, 2>& frame) {
  const double step = 1e-6;
  const Vec3 r0 = transverse_residual(MomentumPoint::from(k), p, frame);
  Eigen::Matrix<double, 2, 3> J;
  for (int c = 0; c < 3; ++c) {
    Vec3 kp = k, km = k;
    kp(c) += step;
    km(c) -= step;
    const Vec3 d = (transverse_residual(MomentumPoint::from(kp), p, frame) -
                    transverse_residual(MomentumPoint::from(km), p, frame)) / (2.0 * step);
    J.col(c) = d.head<2>();
  }
  const Eigen::Matrix2d JJt = J * J.transpose();
  if (std::abs(JJt.determinant()) < 1e-300) return k;
  const Eigen::Vector2d r = r0.head<2>();
  return k - J.transpose() * JJt.inverse() * r;
}

}  // namespace detail

/// Preimage of a spin orientation under k -> bloch_ground(k), as closed
/// polylines in T3.
///
/// An auxiliary res^3 grid, shifted by a fixed sub-cell offset, is cut into Freudenthal tetrahedra (six per
/// cube, conforming across cubes). Inside each tetrahedron the transverse
/// components n.e1 and n.e2 are linear, so their common zero set is a
/// straight segment whose endpoints lie on two faces. Segments on the
/// target's hemisphere (n.s > 0) are directed along grad(n.e1) x grad(n.e2),
/// which orients every loop consistently with the frame (e1, e2, s), and
/// are chained through shared faces. Each vertex then gets one Gauss-Newton
/// refinement toward n(k) = s.
inline std::vector<Polyline> preimage_contours(const HopfParams& p, const SpinTarget& target,
                                               const ContourOptions& opt = {}) {
  p.validate();
  require(opt.res >= 16, "preimage resolution must be at least 16");
  require(opt.res <= 128, "preimage resolution above 128 overflows face keys");
  const int res = opt.res;
  const auto frame = target.transverse_frame();
  const Vec3& s = target.direction();
  const std::size_t nv = std::size_t(res) * res * res;

  auto vid = [res](int i, int j, int l) {
    auto w = [res](int x) { return ((x % res) + res) % res; };
    return (std::size_t(w(i)) * res + w(j)) * res + w(l);
  };

  // Level functions on grid vertices.
  std::vector<double> f1(nv), f2(nv), f3(nv);
  parallel_for(nv, opt.threads, [&](std::size_t v) {
    const int i = int(v / (std::size_t(res) * res));
    const int j = int((v / res) % res);
    const int l = int(v % res);
    const MomentumPoint k{kTwoPi * (i + detail::kGridOffset[0]) / res, kTwoPi * (j + detail::kGridOffset[1]) / res,
                          kTwoPi * (l + detail::kGridOffset[2]) / res};
    const BlochVector n = bloch_ground(k, p);
    auto nudge = [](double x) { return x == 0.0 ? 1e-300 : x; };
    f1[v] = nudge(n.dot(frame[0]));
    f2[v] = nudge(n.dot(frame[1]));
    f3[v] = n.dot(s);
  });

  static constexpr std::array<std::array<int, 3>, 6> kPermutations{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

  const std::size_t cubes = nv;
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (cubes + kBlock - 1) / kBlock;
  std::vector<std::vector<detail::Segment>> block_segments(blocks);
  std::vector<int> block_anomalies(blocks, 0);

  parallel_blocks(cubes, kBlock, opt.threads, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    auto& out = block_segments[b];
    for (std::size_t c = lo; c < hi; ++c) {
      const int ci = int(c / (std::size_t(res) * res));
      const int cj = int((c / res) % res);
      const int cl = int(c % res);
      for (const auto& perm : kPermutations) {
        std::array<std::array<int, 3>, 4> pos{};
        pos[0] = {ci, cj, cl};
        for (int t = 0; t < 3; ++t) {
          pos[t + 1] = pos[t];
          pos[t + 1][perm[t]] += 1;
        }
        std::array<std::size_t, 4> id{};
        std::array<double, 4> a{}, bb{}, g{};
        for (int t = 0; t < 4; ++t) {
          id[t] = vid(pos[t][0], pos[t][1], pos[t][2]);
          a[t] = f1[id[t]];
          bb[t] = f2[id[t]];
          g[t] = f3[id[t]];
        }
        auto straddles = [](const std::array<double, 4>& v) {
          const double mn = *std::min_element(v.begin(), v.end());
          const double mx = *std::max_element(v.begin(), v.end());
          return mn < 0.0 && mx > 0.0;
        };
        if (!straddles(a) || !straddles(bb)) continue;
        if (*std::max_element(g.begin(), g.end()) <= 0.0) continue;

        // Face opposite vertex `skip`: solve for barycentric weights with both level functions zero.
        std::array<Vec3, 2> pts;
        std::array<std::uint64_t, 2> keys{};
        std::array<double, 2> gval{};
        int found = 0;
        for (int skip = 0; skip < 4; ++skip) {
          std::array<int, 3> f{};
          for (int t = 0, q = 0; t < 4; ++t) {
            if (t != skip) f[q++] = t;
          }
          Eigen::Matrix3d M;
          M << 1.0, 1.0, 1.0, a[f[0]], a[f[1]], a[f[2]], bb[f[0]], bb[f[1]], bb[f[2]];
          const double det = M.determinant();
          if (std::abs(det) < 1e-300) continue;
          const Vec3 lam = M.inverse() * Vec3(1.0, 0.0, 0.0);
          if (!(lam.minCoeff() > 0.0)) continue;
          if (found == 2) {
            ++found;
            break;
          }
          Vec3 x = Vec3::Zero();
          double gv = 0.0;
          for (int q = 0; q < 3; ++q) {
            x += lam(q) * Vec3(pos[f[q]][0], pos[f[q]][1], pos[f[q]][2]);
            gv += lam(q) * g[f[q]];
          }
          std::array<std::uint64_t, 3> key{id[f[0]], id[f[1]], id[f[2]]};
          std::sort(key.begin(), key.end());
          pts[found] = x;
          keys[found] = (key[0] * nv + key[1]) * nv + key[2];
          gval[found] = gv;
          ++found;
        }
        if (found == 0) continue;
        if (found != 2) {
          ++block_anomalies[b];
          continue;
        }
        if (gval[0] + gval[1] <= 0.0) continue;  // antipodal preimage

        Eigen::Matrix3d E;
        for (int t = 0; t < 3; ++t) {
          for (int d = 0; d < 3; ++d) E(t, d) = pos[t + 1][d] - pos[0][d];
        }
        const Eigen::Matrix3d Einv = E.inverse();
        const Vec3 grad_a = Einv * Vec3(a[1] - a[0], a[2] - a[0], a[3] - a[0]);
        const Vec3 grad_b = Einv * Vec3(bb[1] - bb[0], bb[2] - bb[0], bb[3] - bb[0]);
        const Vec3 tangent = grad_a.cross(grad_b);
        if ((pts[1] - pts[0]).dot(tangent) >= 0.0) {
          out.push_back({keys[0], keys[1], pts[0]});
        } else {
          out.push_back({keys[1], keys[0], pts[1]});
        }
      }
    }
  });

  for (int an : block_anomalies) {
    if (an != 0) fail(ErrorKind::ResolutionTooCoarse, "degenerate level-set crossing; change res");
  }
  std::vector<detail::Segment> segments;
  for (auto& bs : block_segments) segments.insert(segments.end(), bs.begin(), bs.end());

  std::unordered_map<std::uint64_t, std::size_t> by_start;
  by_start.reserve(segments.size() * 2);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!by_start.emplace(segments[i].start_key, i).second) {
      fail(ErrorKind::ResolutionTooCoarse, "two preimage segments enter the same face");
    }
  }

  std::vector<char> used(segments.size(), 0);
  std::vector<Polyline> loops;
  const double scale = kTwoPi / res;
  for (std::size_t first = 0; first < segments.size(); ++first) {
    if (used[first]) continue;
    std::vector<Vec3> verts;
    std::size_t cur = first;
    while (true) {
      used[cur] = 1;
      verts.push_back((segments[cur].start + Vec3(detail::kGridOffset[0], detail::kGridOffset[1], detail::kGridOffset[2])) * scale);
      const auto it = by_start.find(segments[cur].end_key);
      if (it == by_start.end()) fail(ErrorKind::ResolutionTooCoarse, "preimage segment chain is open");
      cur = it->second;
      if (cur == first) break;
      if (used[cur]) fail(ErrorKind::ResolutionTooCoarse, "preimage segment chain merges into another loop");
    }

    // Where the spin map has a critical point the preimage degenerates to
    // an isolated point, which marching resolves as a loop of a few cells
    // that shrinks with res. Such loops carry no length and are dropped.
    double extent = 0.0;
    for (const Vec3& v : verts) extent = std::max(extent, torus_delta(verts.front(), v).norm());
    if (extent < 2.0 * std::sqrt(3.0) * scale) continue;

    Polyline loop;
    loop.coords = Coords::T3;
    loop.closed = true;
    loop.target = s;
    loop.h = p.h;
    for (const Vec3& v : verts) {
      Vec3 k = detail::refine_vertex(v, p, frame);
      for (int d = 0; d < 3; ++d) k(d) = wrap_angle(k(d));
      if (!loop.vertices.empty() && torus_delta(loop.vertices.back(), k).norm() < 1e-12) continue;
      loop.vertices.push_back(k);
    }
    while (loop.vertices.size() > 1 && torus_delta(loop.vertices.back(), loop.vertices.front()).norm() < 1e-12) {
      loop.vertices.pop_back();
    }
    if (loop.vertices.size() < 3) fail(ErrorKind::ResolutionTooCoarse, "preimage loop has fewer than 3 vertices");
    for (const Vec3& k : loop.vertices) {
      if ((bloch_ground(MomentumPoint::from(k), p) - s).norm() > opt.curve_tol) {
        fail(ErrorKind::ResolutionTooCoarse, "refined preimage vertex misses the target by more than curve_tol");
      }
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

struct EpsilonQuery {
  SpinTarget target;
  double epsilon;

  EpsilonQuery(SpinTarget t, double eps) : target(std::move(t)), epsilon(eps) {
    require(eps > 0.0 && eps <= 2.0, "epsilon must lie in (0, 2]");
  }
};

struct NeighborhoodSite {
  std::size_t site;
  std::array<int, 3> j;
  BlochVector spin;
};

/// Mesh sites whose spin lies within epsilon (Euclidean) of the target.
inline std::vector<NeighborhoodSite> epsilon_neighborhood(const StateField& field, const EpsilonQuery& q) {
  std::vector<NeighborhoodSite> out;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const BlochVector spin = field.bloch(i);
    if ((spin - q.target.direction()).norm() <= q.epsilon) out.push_back({i, field.mesh().coords(i), spin});
  }
  return out;
}

/// Picks the chart whose pole stays farthest from every vertex.
inline Chart choose_chart(std::span<const std::vector<S3Point>> curves) {
  double south = 2.0, north = 2.0;
  for (const auto& c : curves) {
    for (const auto& eta : c) {
      south = std::min(south, chart_margin(eta, Chart::South));
      north = std::min(north, chart_margin(eta, Chart::North));
    }
  }
  if (std::max(south, north) <= kPoleTolerance) {
    fail(ErrorKind::ChartExhausted, "curves pass through both stereographic poles");
  }
  return south >= north ? Chart::South : Chart::North;
}

inline std::vector<S3Point> lift_to_s3(const Polyline& c, const HopfParams& p) {
  require(c.coords == Coords::T3, "lift expects a T3 polyline");
  std::vector<S3Point> out;
  out.reserve(c.size());
  for (const Vec3& k : c.vertices) out.push_back(map_g(MomentumPoint::from(k), p));
  return out;
}

inline Polyline project_to_r3(const Polyline& source, const std::vector<S3Point>& lifted, Chart chart) {
  Polyline out;
  out.coords = Coords::R3;
  out.closed = source.closed;
  out.target = source.target;
  out.h = source.h;
  out.chart = chart;
  out.vertices.reserve(lifted.size());
  for (const S3Point& eta : lifted) out.vertices.push_back(stereographic_embed(eta, chart));
  return out;
}

/// T3 -> S3 (map g) -> R3 (stereographic). Orientation and closure are kept.
inline Polyline embed_r3(const Polyline& c, const HopfParams& p, std::optional<Chart> chart = std::nullopt) {
  require(c.coords == Coords::T3, "embed_r3 expects a T3 polyline");
  require(c.closed && c.size() >= 3, "embed_r3 expects a closed polyline with at least 3 vertices");
  const auto lifted = lift_to_s3(c, p);
  const Chart use = chart ? *chart : choose_chart(std::span(&lifted, 1));
  return project_to_r3(c, lifted, use);
}

/// Embeds several curves into one shared chart, as linking requires.
inline std::vector<Polyline> embed_r3_common(std::span<const Polyline> curves, const HopfParams& p) {
  std::vector<std::vector<S3Point>> lifted;
  for (const auto& c : curves) {
    require(c.closed && c.size() >= 3, "embed_r3 expects closed polylines with at least 3 vertices");
    lifted.push_back(lift_to_s3(c, p));
  }
  std::vector<Polyline> out;
  if (curves.empty()) return out;
  const Chart chart = choose_chart(lifted);
  for (std::size_t i = 0; i < curves.size(); ++i) out.push_back(project_to_r3(curves[i], lifted[i], chart));
  return out;
}

/// Signed solid angle / 4pi subtended between two straight segments; the
/// Gauss linking integral of a segment pair in closed form.
inline double segment_pair_linking(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4) {
  const Vec3 r13 = p3 - p1, r14 = p4 - p1, r23 = p3 - p2, r24 = p4 - p2;
  std::array<Vec3, 4> n{r13.cross(r14), r14.cross(r24), r24.cross(r23), r23.cross(r13)};
  for (auto& v : n) {
    const double len = v.norm();
    if (len < 1e-300) return 0.0;
    v /= len;
  }
  auto as = [](double x) { return std::asin(std::clamp(x, -1.0, 1.0)); };
  const double omega = as(n[0].dot(n[1])) + as(n[1].dot(n[2])) + as(n[2].dot(n[3])) + as(n[3].dot(n[0]));
  const double orient = (p4 - p3).cross(p2 - p1).dot(r13);
  if (orient == 0.0) return 0.0;
  return (orient > 0.0 ? omega : -omega) / (4.0 * kPi);
}

struct LinkingResult {
  int value = 0;
  double raw = 0.0;
  /// |raw - value|.
  double residual = 0.0;
};

inline LinkingResult linking_number(const Polyline& a, const Polyline& b, double tol_sep = kMinCurveSeparation,
                                    unsigned threads = 1) {
  if (!a.closed || !b.closed) fail(ErrorKind::NotClosed, "linking number needs closed curves");
  require(a.coords == Coords::R3 && b.coords == Coords::R3, "linking number needs R3 curves; embed T3 curves first");
  require(a.size() >= 3 && b.size() >= 3, "closed curves need at least 3 vertices");
  if (a.chart && b.chart) require(*a.chart == *b.chart, "curves embedded in different charts");

  double min_sep = std::numeric_limits<double>::infinity();
  for (const auto& u : a.vertices) {
    for (const auto& v : b.vertices) min_sep = std::min(min_sep, (u - v).norm());
  }
  if (min_sep < tol_sep) {
    fail(ErrorKind::CurvesTooClose, "curves approach within " + std::to_string(min_sep));
  }

  const std::size_t na = a.size(), nb = b.size();
  constexpr std::size_t kBlock = 16;
  std::vector<double> partial((na + kBlock - 1) / kBlock, 0.0);
  parallel_blocks(na, kBlock, threads, [&](std::size_t blk, std::size_t lo, std::size_t hi) {
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const Vec3& p1 = a.vertices[i];
      const Vec3& p2 = a.vertices[(i + 1) % na];
      for (std::size_t j = 0; j < nb; ++j) {
        sum += segment_pair_linking(p1, p2, b.vertices[j], b.vertices[(j + 1) % nb]);
      }
    }
    partial[blk] = sum;
  });
  LinkingResult r;
  for (double x : partial) r.raw += x;
  r.value = int(std::lround(r.raw));
  r.residual = std::abs(r.raw - r.value);
  return r;
}

/// Lift of a T3 loop to the universal cover R3 (Coords::R3, chart unset):
/// consecutive vertices are joined by their shortest torus displacement.
/// Fails with NotClosed when the loop winds around the torus, since its
/// lift is then an open arc.
inline Polyline lift_to_cover(const Polyline& c) {
  require(c.coords == Coords::T3, "lift_to_cover expects a T3 polyline");
  require(c.closed && c.size() >= 3, "lift_to_cover expects a closed polyline with at least 3 vertices");
  Polyline out;
  out.coords = Coords::R3;
  out.closed = true;
  out.target = c.target;
  out.h = c.h;
  out.vertices.reserve(c.size());
  Vec3 cur = c.vertices.front();
  out.vertices.push_back(cur);
  for (std::size_t i = 1; i < c.size(); ++i) {
    cur += torus_delta(c.vertices[i - 1], c.vertices[i]);
    out.vertices.push_back(cur);
  }
  const Vec3 gap = cur + torus_delta(c.vertices.back(), c.vertices.front()) - c.vertices.front();
  if (gap.norm() > 1e-9) {
    fail(ErrorKind::NotClosed, "loop winds around the torus by (" + std::to_string(std::lround(gap.x() / kTwoPi)) +
                                   ", " + std::to_string(std::lround(gap.y() / kTwoPi)) + ", " +
                                   std::to_string(std::lround(gap.z() / kTwoPi)) + "); its lift is not closed");
  }
  return out;
}

/// Linking number of two null-homologous loops in T3: the sum of R3
/// linking numbers between one lift of `a` and every lattice translate of
/// the lift of `b`. Translates with disjoint bounding boxes are unlinked,
/// so the sum is finite.
inline LinkingResult torus_linking_number(const Polyline& a, const Polyline& b,
                                          double tol_sep = kMinCurveSeparation, unsigned threads = 1) {
  const Polyline la = lift_to_cover(a);
  const Polyline lb = lift_to_cover(b);
  Vec3 amin = la.vertices.front(), amax = amin, bmin = lb.vertices.front(), bmax = bmin;
  for (const auto& v : la.vertices) {
    amin = amin.cwiseMin(v);
    amax = amax.cwiseMax(v);
  }
  for (const auto& v : lb.vertices) {
    bmin = bmin.cwiseMin(v);
    bmax = bmax.cwiseMax(v);
  }
  std::array<int, 3> lo{}, hi{};
  for (int d = 0; d < 3; ++d) {
    lo[d] = int(std::floor((amin(d) - bmax(d)) / kTwoPi));
    hi[d] = int(std::ceil((amax(d) - bmin(d)) / kTwoPi));
  }
  LinkingResult r;
  for (int x = lo[0]; x <= hi[0]; ++x) {
    for (int y = lo[1]; y <= hi[1]; ++y) {
      for (int z = lo[2]; z <= hi[2]; ++z) {
        const Vec3 shift = kTwoPi * Vec3(x, y, z);
        const Vec3 smin = bmin + shift, smax = bmax + shift;
        if ((smin.array() > amax.array() + tol_sep).any() || (smax.array() < amin.array() - tol_sep).any()) continue;
        Polyline moved = lb;
        for (auto& v : moved.vertices) v += shift;
        r.raw += linking_number(la, moved, tol_sep, threads).raw;
      }
    }
  }
  r.value = int(std::lround(r.raw));
  r.residual = std::abs(r.raw - r.value);
  return r;
}

/// Pairwise linking numbers between the preimages of several targets.
struct LinkMatrix {
  double h = 0.0;
  std::vector<BlochVector> targets;
  /// Loops found per target; 0 marks an absent preimage.
  std::vector<int> loop_counts;
  /// Off-diagonal entries; empty on the diagonal and where a preimage is absent.
  std::vector<std::vector<std::optional<int>>> values;
  std::vector<std::vector<double>> residuals;

  [[nodiscard]] bool multi_loop() const {
    return std::any_of(loop_counts.begin(), loop_counts.end(), [](int c) { return c > 1; });
  }
};

/// Linking is computed on the torus itself (torus_linking_number). The
/// route through g and a stereographic chart is not used here: g covers S3
/// |deg g| times, so in the chi = -2 phase both components of a preimage
/// land on the same Hopf fiber and the embedded link counts it twice.
/// For targets with several preimage loops the entry is the linking number
/// of the whole preimages (sum over component pairs); loop_counts reports
/// the component structure.
inline LinkMatrix link_matrix(const HopfParams& p, std::span<const SpinTarget> targets,
                              const ContourOptions& opt = {}) {
  const std::size_t m = targets.size();
  LinkMatrix out;
  out.h = p.h;
  out.values.assign(m, std::vector<std::optional<int>>(m));
  out.residuals.assign(m, std::vector<double>(m, 0.0));

  std::vector<std::vector<Polyline>> loops(m);
  for (std::size_t t = 0; t < m; ++t) {
    out.targets.push_back(targets[t].direction());
    loops[t] = preimage_contours(p, targets[t], opt);
    out.loop_counts.push_back(int(loops[t].size()));
  }

  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (loops[i].empty() || loops[j].empty()) continue;
      double raw = 0.0;
      for (const auto& a : loops[i]) {
        for (const auto& b : loops[j]) raw += torus_linking_number(a, b, kMinCurveSeparation, opt.threads).raw;
      }
      const int value = int(std::lround(raw));
      out.values[i][j] = out.values[j][i] = value;
      out.residuals[i][j] = out.residuals[j][i] = std::abs(raw - value);
    }
  }
  return out;
}

}  // namespace hopf
