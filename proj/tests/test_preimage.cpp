#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>
#include <set>

#include "hopf/preimage.hpp"

using namespace hopf;

namespace {

Polyline circle(const Vec3& center, const Vec3& u, const Vec3& v, double radius, int m) {
  Polyline c;
  c.coords = Coords::R3;
  for (int i = 0; i < m; ++i) {
    const double t = kTwoPi * i / m;
    c.vertices.push_back(center + radius * (std::cos(t) * u + std::sin(t) * v));
  }
  return c;
}

/// Two (1,2) curves on a standard torus, forming the (2,4) torus link.
std::pair<Polyline, Polyline> torus_link(int m) {
  auto component = [m](double shift) {
    Polyline c;
    c.coords = Coords::R3;
    for (int i = 0; i < m; ++i) {
      const double t = kTwoPi * i / m;
      const double theta = 2.0 * t + shift;
      c.vertices.push_back({(2.0 + std::cos(theta)) * std::cos(t), (2.0 + std::cos(theta)) * std::sin(t),
                            std::sin(theta)});
    }
    return c;
  };
  return {component(0.0), component(kPi)};
}

/// Midpoint-rule Gauss double integral, independent of the closed-form segment formula.
double gauss_quadrature(const Polyline& a, const Polyline& b) {
  double total = 0.0;
  const std::size_t na = a.size(), nb = b.size();
  for (std::size_t i = 0; i < na; ++i) {
    const Vec3 da = a.vertices[(i + 1) % na] - a.vertices[i];
    const Vec3 ma = 0.5 * (a.vertices[(i + 1) % na] + a.vertices[i]);
    for (std::size_t j = 0; j < nb; ++j) {
      const Vec3 db = b.vertices[(j + 1) % nb] - b.vertices[j];
      const Vec3 mb = 0.5 * (b.vertices[(j + 1) % nb] + b.vertices[j]);
      const Vec3 r = ma - mb;
      total += r.dot(da.cross(db)) / std::pow(r.norm(), 3);
    }
  }
  return total / (4.0 * kPi);
}

Polyline transformed(const Polyline& c, const Eigen::Matrix3d& R, const Vec3& t) {
  Polyline out = c;
  for (auto& v : out.vertices) v = R * v + t;
  return out;
}

std::vector<SpinTarget> targets(std::initializer_list<Vec3> vs) {
  std::vector<SpinTarget> out;
  for (const auto& v : vs) out.push_back(SpinTarget::normalized(v));
  return out;
}

}  // namespace

TEST(SpinTargets, RequireUnitVectors) {
  EXPECT_THROW(SpinTarget(Vec3(1, 1, 0)), Error);
  EXPECT_NO_THROW(SpinTarget(Vec3(0, 0, -1)));
  const SpinTarget t = SpinTarget::normalized({-1, -1, 0});
  const auto frame = t.transverse_frame();
  EXPECT_NEAR(frame[0].dot(t.direction()), 0.0, 1e-15);
  EXPECT_NEAR(frame[1].dot(t.direction()), 0.0, 1e-15);
  EXPECT_NEAR(frame[0].cross(frame[1]).dot(t.direction()), 1.0, 1e-12);
  EXPECT_THROW(EpsilonQuery(t, 0.0), Error);
  EXPECT_THROW(EpsilonQuery(t, 2.5), Error);
}

TEST(Linking, CanonicalHopfLink) {
  const Polyline a = circle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.0, 200);
  const Polyline b = circle({1, 0, 0}, {1, 0, 0}, {0, 0, 1}, 1.0, 200);
  const LinkingResult r = linking_number(a, b);
  EXPECT_EQ(std::abs(r.value), 1);
  EXPECT_LT(r.residual, 1e-9);
  EXPECT_EQ(linking_number(b, a).value, r.value);
}

TEST(Linking, SeparatedCoplanarCirclesAreUnlinked) {
  const Polyline a = circle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.0, 100);
  const Polyline b = circle({3, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.0, 100);
  const LinkingResult r = linking_number(a, b);
  EXPECT_EQ(r.value, 0);
  EXPECT_LT(std::abs(r.raw), 1e-12);
}

TEST(Linking, ClosedFormAgreesWithGaussQuadrature) {
  auto [a, b] = torus_link(400);
  const double exact = linking_number(a, b).raw;
  EXPECT_NEAR(std::abs(exact), 2.0, 1e-9);
  EXPECT_NEAR(gauss_quadrature(a, b), exact, 1e-3);
  const Polyline c = circle({0.2, -0.1, 0.05}, {1, 0, 0}, {0, 0.6, 0.8}, 1.3, 300);
  const Polyline d = circle({1.1, 0.3, 0.0}, Vec3(1, 1, 0).normalized(), {0, 0, 1}, 0.9, 300);
  EXPECT_NEAR(gauss_quadrature(c, d), linking_number(c, d).raw, 1e-3);
}

TEST(Linking, InvariantUnderSubdivisionRotationAndDoubleReversal) {
  auto [a, b] = torus_link(90);
  const int base = linking_number(a, b).value;
  ASSERT_EQ(std::abs(base), 2);
  EXPECT_EQ(linking_number(a.subdivided(), b).value, base);
  EXPECT_EQ(linking_number(a.subdivided(), b.subdivided().subdivided()).value, base);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int t = 0; t < 10; ++t) {
    const Eigen::Quaterniond q(Eigen::Vector4d(g(rng), g(rng), g(rng), g(rng)).normalized());
    const Eigen::Matrix3d R = q.toRotationMatrix();
    const Vec3 shift(g(rng), g(rng), g(rng));
    const LinkingResult r = linking_number(transformed(a, R, shift), transformed(b, R, shift));
    EXPECT_EQ(r.value, base);
    EXPECT_LT(r.residual, 1e-9);
  }
  EXPECT_EQ(linking_number(a.reversed(), b.reversed()).value, base);
  EXPECT_EQ(linking_number(a.reversed(), b).value, -base);
  EXPECT_EQ(linking_number(a, b.reversed()).value, -base);
}

TEST(Linking, IndependentOfThreadCount) {
  auto [a, b] = torus_link(300);
  EXPECT_EQ(linking_number(a, b, kMinCurveSeparation, 1).raw, linking_number(a, b, kMinCurveSeparation, 8).raw);
}

TEST(Linking, Errors) {
  Polyline a = circle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.0, 50);
  const Polyline b = circle({1, 0, 0}, {1, 0, 0}, {0, 0, 1}, 1.0, 50);
  Polyline open = a;
  open.closed = false;
  try {
    (void)linking_number(open, b);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotClosed);
  }
  try {
    (void)linking_number(a, transformed(a, Eigen::Matrix3d::Identity(), Vec3(0, 0, 1e-4)));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CurvesTooClose);
  }
  Polyline t3 = a;
  t3.coords = Coords::T3;
  EXPECT_THROW((void)linking_number(t3, b), Error);
}

TEST(Preimage, SingleLoopNearTransition) {
  const auto loops = preimage_contours({2.9}, SpinTarget(Vec3(1, 0, 0)), {64, kCurveTolerance, 4});
  ASSERT_EQ(loops.size(), 1u);
  EXPECT_TRUE(loops[0].closed);
  EXPECT_GE(loops[0].size(), 3u);
  EXPECT_EQ(loops[0].coords, Coords::T3);
}

TEST(Preimage, SouthPoleHasNoPreimageInTrivialPhase) {
  EXPECT_TRUE(preimage_contours({3.1}, SpinTarget(Vec3(0, 0, -1)), {64, kCurveTolerance, 4}).empty());
  // The preimage exists on the topological side of the transition.
  EXPECT_EQ(preimage_contours({2.9}, SpinTarget(Vec3(0, 0, -1)), {64, kCurveTolerance, 4}).size(), 1u);
}

TEST(Preimage, VerticesLieOnTheoreticalCurve) {
  const SpinTarget target = SpinTarget::normalized({-1, -1, 0});
  for (int res : {48, 64, 96}) {
    const auto loops = preimage_contours({2.0}, target, {res, kCurveTolerance, 4});
    ASSERT_EQ(loops.size(), 1u) << res;
    const double cell = kTwoPi / res;
    const auto& v = loops[0].vertices;
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (int d = 0; d < 3; ++d) {
        ASSERT_GE(v[i](d), 0.0);
        ASSERT_LT(v[i](d), kTwoPi);
      }
      worst = std::max(worst, (bloch_ground(MomentumPoint::from(v[i]), {2.0}) - target.direction()).norm());
      // Consecutive vertices, including the closing pair, stay within a couple of cells.
      EXPECT_LT(torus_delta(v[i], v[(i + 1) % v.size()]).norm(), 2.0 * std::sqrt(3.0) * cell);
    }
    EXPECT_LE(worst, kCurveTolerance);
    EXPECT_LT(worst, 1e-3) << "one refinement pass should land well inside the tolerance";
  }
}

TEST(Preimage, ConvergesUnderRefinement) {
  // Every vertex of the res = 64 loop is close to the res = 128 loop.
  const SpinTarget target = SpinTarget::normalized({-1, -1, 0});
  const auto coarse = preimage_contours({2.0}, target, {64, kCurveTolerance, 4});
  const auto fine = preimage_contours({2.0}, target, {128, kCurveTolerance, 4});
  ASSERT_EQ(coarse.size(), 1u);
  ASSERT_EQ(fine.size(), 1u);
  for (const auto& p : coarse[0].vertices) {
    double best = 1e9;
    for (const auto& q : fine[0].vertices) best = std::min(best, torus_delta(p, q).norm());
    ASSERT_LT(best, kTwoPi / 64);
  }
}

TEST(Preimage, DeterministicAcrossThreadCounts) {
  const SpinTarget target(Vec3(0, 1, 0));
  const auto a = preimage_contours({2.9}, target, {48, kCurveTolerance, 1});
  const auto b = preimage_contours({2.9}, target, {48, kCurveTolerance, 8});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].vertices, b[i].vertices);
}

TEST(Preimage, RejectsBadResolution) {
  EXPECT_THROW((void)preimage_contours({2.0}, SpinTarget(Vec3(1, 0, 0)), {8, kCurveTolerance, 1}), Error);
  EXPECT_THROW((void)preimage_contours({2.0}, SpinTarget(Vec3(1, 0, 0)), {256, kCurveTolerance, 1}), Error);
}

TEST(Preimage, TwoComponentsInMinusTwoPhase) {
  const auto loops = preimage_contours({0.0}, SpinTarget(Vec3(1, 0, 0)), {64, kCurveTolerance, 4});
  EXPECT_EQ(loops.size(), 2u);
}

TEST(Neighborhood, Examples) {
  const StateField f = sample_state_field({2.0}, MeshSpec(10), 4);
  const SpinTarget s = SpinTarget::normalized({-1, -1, 0});
  EXPECT_EQ(epsilon_neighborhood(f, {s, 2.0}).size(), f.size());
  EXPECT_TRUE(epsilon_neighborhood(f, {s, 1e-6}).empty());
  for (const Vec3& dir : {Vec3(1, 1, 0), Vec3(-1, -1, 0), Vec3(1, -1, 0), Vec3(-1, 1, 0)}) {
    const SpinTarget t = SpinTarget::normalized(dir);
    const auto narrow = epsilon_neighborhood(f, {t, 0.3});
    const auto wide = epsilon_neighborhood(f, {t, 0.35});
    EXPECT_FALSE(narrow.empty());
    EXPECT_GE(wide.size(), narrow.size());
    std::set<std::size_t> wide_sites;
    for (const auto& w : wide) wide_sites.insert(w.site);
    for (const auto& n : narrow) {
      EXPECT_TRUE(wide_sites.count(n.site));
      EXPECT_LE((n.spin - t.direction()).norm(), 0.3);
    }
  }
}

TEST(Neighborhood, MonotoneInEpsilon) {
  const StateField f = sample_state_field({0.0}, MeshSpec(8), 4);
  const SpinTarget t = SpinTarget::normalized({0.3, -0.2, 0.9});
  std::size_t prev = 0;
  for (double eps = 0.05; eps <= 2.0; eps += 0.05) {
    const std::size_t count = epsilon_neighborhood(f, {t, eps}).size();
    EXPECT_GE(count, prev);
    prev = count;
  }
}

TEST(Embedding, PreservesVertexCountAndClosure) {
  const auto loops = preimage_contours({2.9}, SpinTarget(Vec3(1, 0, 0)), {64, kCurveTolerance, 4});
  ASSERT_EQ(loops.size(), 1u);
  const Polyline r3 = embed_r3(loops[0], {2.9});
  EXPECT_EQ(r3.coords, Coords::R3);
  EXPECT_TRUE(r3.closed);
  EXPECT_EQ(r3.size(), loops[0].size());
  ASSERT_TRUE(r3.chart.has_value());
  // A chart margin of at least delta keeps coordinates below 2 / delta.
  for (const auto& v : r3.vertices) {
    ASSERT_TRUE(v.allFinite());
    ASSERT_LT(v.norm(), 2.0 / kPoleTolerance);
  }
}

TEST(Embedding, RejectsDegenerateInput) {
  Polyline two;
  two.coords = Coords::T3;
  two.vertices = {Vec3(0.1, 0.2, 0.3), Vec3(0.2, 0.2, 0.3)};
  EXPECT_THROW((void)embed_r3(two, {2.0}), Error);
}

TEST(Embedding, ChartSelection) {
  std::vector<std::vector<S3Point>> near_south{{S3Point(0, 0, 0, -1), S3Point(1, 0, 0, 0)}};
  EXPECT_EQ(choose_chart(near_south), Chart::North);
  std::vector<std::vector<S3Point>> near_north{{S3Point(0, 0, 0, 1), S3Point(0, 1, 0, 0)}};
  EXPECT_EQ(choose_chart(near_north), Chart::South);
  std::vector<std::vector<S3Point>> both{{S3Point(0, 0, 0, 1)}, {S3Point(0, 0, 0, -1)}};
  try {
    (void)choose_chart(both);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ChartExhausted);
  }
}

TEST(Embedding, EmbeddedFibersLinkOnceInUnitPhase) {
  const HopfParams p{2.9};
  const auto a = preimage_contours(p, SpinTarget(Vec3(1, 0, 0)), {64, kCurveTolerance, 4});
  const auto b = preimage_contours(p, SpinTarget(Vec3(0, 1, 0)), {64, kCurveTolerance, 4});
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(b.size(), 1u);
  const std::vector<Polyline> pair{a[0], b[0]};
  const auto embedded = embed_r3_common(pair, p);
  const LinkingResult r = linking_number(embedded[0], embedded[1]);
  EXPECT_EQ(std::abs(r.value), 1);
  EXPECT_LT(r.residual, 1e-6);
  // The torus computation agrees with the embedded one here.
  EXPECT_EQ(torus_linking_number(a[0], b[0]).value, r.value);
}

TEST(TorusLinking, LiftAndWindingCheck) {
  Polyline loop;
  loop.coords = Coords::T3;
  // Crosses the kx = 0 boundary without winding.
  loop.vertices = {Vec3(6.2, 1, 1), Vec3(0.1, 1, 1), Vec3(0.1, 1.5, 1), Vec3(6.2, 1.5, 1)};
  const Polyline lifted = lift_to_cover(loop);
  EXPECT_NEAR(lifted.vertices[1].x(), 0.1 + kTwoPi, 1e-12);
  Polyline wraps;
  wraps.coords = Coords::T3;
  for (int i = 0; i < 8; ++i) wraps.vertices.push_back(Vec3(kTwoPi * i / 8, 1, 1));
  try {
    (void)lift_to_cover(wraps);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotClosed);
  }
}

TEST(TorusLinking, CountsTranslatesAcrossTheBoundary) {
  // A Hopf link straddling the kx = 0 face, given with wrapped coordinates.
  auto wrap = [](Polyline c) {
    c.coords = Coords::T3;
    for (auto& v : c.vertices) {
      for (int d = 0; d < 3; ++d) v(d) = wrap_angle(v(d));
    }
    return c;
  };
  const Polyline a = wrap(circle({0, 3, 3}, {1, 0, 0}, {0, 1, 0}, 1.0, 120));
  const Polyline b = wrap(circle({1, 3, 3}, {1, 0, 0}, {0, 0, 1}, 1.0, 120));
  EXPECT_EQ(std::abs(torus_linking_number(a, b).value), 1);
}

TEST(LinkMatrix, UnitPhaseAllPairsLinkOnceWithCommonSign) {
  const auto m = link_matrix({2.9}, targets({{1, 0, 0}, {0, 1, 0}, {0, 0, -1}}), {64, kCurveTolerance, 4});
  EXPECT_EQ(m.loop_counts, (std::vector<int>{1, 1, 1}));
  std::set<int> values;
  for (int i = 0; i < 3; ++i) {
    EXPECT_FALSE(m.values[i][i].has_value());
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      ASSERT_TRUE(m.values[i][j].has_value());
      EXPECT_EQ(m.values[i][j], m.values[j][i]);
      EXPECT_EQ(std::abs(*m.values[i][j]), 1);
      EXPECT_LT(m.residuals[i][j], 1e-6);
      values.insert(*m.values[i][j]);
    }
  }
  EXPECT_EQ(values.size(), 1u);
}

TEST(LinkMatrix, TrivialPhaseUnlinks) {
  const auto m = link_matrix({3.1}, targets({{1, 0, 0}, {0, 1, 0}, {0, 0, -1}}), {64, kCurveTolerance, 4});
  EXPECT_EQ(m.loop_counts[2], 0);
  EXPECT_EQ(m.values[0][1], 0);
  EXPECT_FALSE(m.values[0][2].has_value());
  EXPECT_FALSE(m.values[2][1].has_value());
}

TEST(LinkMatrix, MinusTwoPhaseLinksTwice) {
  const auto m = link_matrix({0.0}, targets({{1, 0, 0}, {0, 1, 0}, {0, 0, -1}}), {64, kCurveTolerance, 4});
  EXPECT_TRUE(m.multi_loop());
  std::set<int> values;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      ASSERT_TRUE(m.values[i][j].has_value());
      EXPECT_EQ(std::abs(*m.values[i][j]), 2);
      values.insert(*m.values[i][j]);
    }
  }
  EXPECT_EQ(values.size(), 1u);
}

TEST(LinkMatrix, SignTracksHopfIndexAcrossPhases) {
  // Opposite-sign indices give opposite-sign links under one orientation convention.
  const auto unit = link_matrix({2.0}, targets({{1, 0, 0}, {0, 1, 0}}), {64, kCurveTolerance, 4});
  const auto two = link_matrix({0.0}, targets({{1, 0, 0}, {0, 1, 0}}), {64, kCurveTolerance, 4});
  ASSERT_TRUE(unit.values[0][1] && two.values[0][1]);
  EXPECT_EQ(*two.values[0][1], -2 * *unit.values[0][1]);
}
