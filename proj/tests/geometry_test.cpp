#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tubempc/geometry.hpp"
#include "tubempc/geometry_io.hpp"

using namespace tubempc;
using oracle::Vector2d;

namespace {

HPolytope box2(double lo, double hi) {
  return HPolytope::box(VectorXd::Constant(2, lo), VectorXd::Constant(2, hi));
}

VectorXd v2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

HPolytope triangle() {
  return oracle::hull_polytope(oracle::hull2d({{0, 0}, {1, 0}, {0, 1}}));
}

}  // namespace

TEST(Lp, MaxOverBox) {
  const LPResult r = lp_solve(v2(1, 0), box2(-1, 1), Sense::max);
  ASSERT_EQ(r.status, LPStatus::optimal);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  EXPECT_NEAR(r.point(0), 1.0, 1e-12);
}

TEST(Lp, ContradictoryRowsAreInfeasible) {
  MatrixXd C(2, 1);
  C << -1, 1;
  VectorXd d(2);
  d << -2, 1;
  const HPolytope P(C, d);
  EXPECT_TRUE(P.is_empty());
  VectorXd c(1);
  c << 1;
  EXPECT_EQ(lp_solve(c, P, Sense::min).status, LPStatus::infeasible);
}

TEST(Lp, TriangleMatchesVertexEnumeration) {
  const HPolytope T = triangle();
  const auto verts = oracle::vertices2d(T);
  ASSERT_EQ(verts.size(), 3u);
  const LPResult r = lp_solve(v2(1, 1), T, Sense::max);
  ASSERT_EQ(r.status, LPStatus::optimal);
  EXPECT_NEAR(r.value, oracle::support_points(verts, {1, 1}), 1e-12);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  EXPECT_LE((T.C() * r.point - T.d()).maxCoeff(), 1e-9);
}

TEST(Lp, UnboundedDirection) {
  MatrixXd C(1, 2);
  C << 1, 0;
  const HPolytope half(C, VectorXd::Ones(1));
  EXPECT_FALSE(half.is_bounded());
  EXPECT_EQ(lp_solve(v2(0, 1), half, Sense::max).status, LPStatus::unbounded);
  EXPECT_TRUE(std::isinf(support(half, v2(0, 1))));
}

TEST(Lp, DimensionMismatchThrows) {
  EXPECT_ANY_THROW(lp_solve(VectorXd::Ones(3), box2(-1, 1), Sense::max));
}

TEST(Lp, RandomPolygonsAgreeWithVertexOracle) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 40; ++t) {
    const auto verts = oracle::random_polygon(rng, 12, 0.5, 2.0);
    const HPolytope P = oracle::hull_polytope(verts);
    for (const auto& l : circle_directions(17)) {
      const LPResult r = lp_solve(l, P, Sense::max);
      ASSERT_EQ(r.status, LPStatus::optimal);
      EXPECT_NEAR(r.value, oracle::support_points(verts, l), 1e-9);
      EXPECT_LE((P.C() * r.point - P.d()).maxCoeff(), 1e-9);
    }
  }
}

TEST(Support, UnitBox) { EXPECT_NEAR(support(box2(-1, 1), v2(1, 1)), 2.0, 1e-12); }

TEST(Support, ChainOfHalfIdentity) {
  const auto S = SupportSet::minkowski_chain(box2(-1, 1), {MatrixXd::Identity(2, 2),
                                                          0.5 * MatrixXd::Identity(2, 2)});
  EXPECT_NEAR(S.support(v2(1, 0)), 1.5, 1e-12);
}

TEST(Support, HullOfUnionIsMaxOfMembers) {
  const auto a = SupportSet::polytope(box2(-1, 1));
  const auto b = SupportSet::polytope(box2(-2, 0.5));
  const auto H = SupportSet::hull_of_union({a, b});
  EXPECT_NEAR(H.support(v2(1, 0)), 1.0, 1e-12);
  for (const auto& l : sphere_directions(2, 64, 3))
    EXPECT_DOUBLE_EQ(H.support(l), std::max(a.support(l), b.support(l)));
}

TEST(Support, LinearImageAndScaling) {
  MatrixXd M(2, 2);
  M << 2, 1, 0, 1;
  const auto S = SupportSet::polytope(box2(-1, 1));
  const auto img = SupportSet::linear_image(M, S);
  const auto sc = SupportSet::scaled(3.0, S);
  for (const auto& l : sphere_directions(2, 32, 5)) {
    EXPECT_NEAR(img.support(l), S.support(M.transpose() * l), 1e-12);
    EXPECT_NEAR(sc.support(l), 3.0 * S.support(l), 1e-12);
  }
}

TEST(Support, PositivelyHomogeneous) {
  const auto S = SupportSet::minkowski_chain(triangle(), {MatrixXd::Identity(2, 2)}, 1.7);
  for (const auto& l : sphere_directions(2, 32, 9))
    for (double a : {0.0, 0.3, 2.5}) EXPECT_NEAR(S.support(a * l), a * S.support(l), 1e-12);
}

TEST(Support, MinkowskiAdditivity) {
  std::mt19937_64 rng(5);
  const auto A = oracle::random_polygon(rng, 9, 0.3, 1.0);
  MatrixXd M(2, 2);
  M << 0.6, 0.2, -0.1, 0.4;
  const HPolytope W = oracle::hull_polytope(A);
  const auto sum = SupportSet::minkowski_chain(W, {MatrixXd::Identity(2, 2), M});
  const auto sum_pts = oracle::minkowski(A, oracle::transform(M, A));
  for (const auto& l : sphere_directions(2, 64, 2)) {
    EXPECT_NEAR(sum.support(l), support(W, l) + support(W, M.transpose() * l), 1e-12);
    EXPECT_NEAR(sum.support(l), oracle::support_points(sum_pts, l), 1e-9);
  }
}

TEST(Pontryagin, BoxMinusSmallBox) {
  const HPolytope R = pontryagin_diff(box2(-1, 1), box2(-0.1, 0.1));
  ASSERT_TRUE(R.axis_box().has_value());
  EXPECT_TRUE(R.axis_box()->first.isApprox(VectorXd::Constant(2, -0.9), 1e-12));
  EXPECT_TRUE(R.axis_box()->second.isApprox(VectorXd::Constant(2, 0.9), 1e-12));
}

TEST(Pontryagin, OriginIsIdentity) {
  const HPolytope P = triangle();
  const HPolytope R = pontryagin_diff(P, HPolytope::box(VectorXd::Zero(2), VectorXd::Zero(2)));
  EXPECT_TRUE(R.C().isApprox(P.C()));
  EXPECT_TRUE((R.d() - P.d()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST(Pontryagin, OctagonAgainstGrid) {
  const auto oct = oracle::regular_polygon(8, 0.5, M_PI / 8);
  const HPolytope S = oracle::hull_polytope(oracle::hull2d(oct));
  const HPolytope R = pontryagin_diff(box2(-1, 1), S);
  for (int i = 0; i < R.rows(); ++i) {
    const Vector2d c = R.C().row(i).transpose();
    EXPECT_NEAR(R.d()(i), 1.0 - oracle::support_points(oct, c), 1e-12);
  }
  const HPolytope P = box2(-1, 1);
  int checked = 0;
  for (double x = -1.0; x <= 1.0; x += 0.01)
    for (double y = -1.0; y <= 1.0; y += 0.01) {
      const Vector2d p(x, y);
      const double m = oracle::pontryagin_margin(P, oct, p);
      if (std::abs(m) < 1e-6) continue;
      EXPECT_EQ(contains_point(R, p, 1e-9), m > 0) << x << "," << y;
      ++checked;
    }
  EXPECT_GT(checked, 30000);
}

TEST(Pontryagin, TooLargeIsFlaggedEmpty) {
  const HPolytope R = pontryagin_diff(box2(-1, 1), box2(-2, 2));
  EXPECT_TRUE(R.is_empty());
}

TEST(Pontryagin, DimensionMismatchThrows) {
  EXPECT_ANY_THROW(pontryagin_diff(box2(-1, 1), HPolytope::symmetric_box(VectorXd::Ones(3))));
}

TEST(Pontryagin, ErodeThenDilateStaysInside) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto Pv = oracle::random_polygon(rng, 14, 1.0, 2.0);
  const auto Sv = oracle::random_polygon(rng, 6, 0.1, 0.4);
  const HPolytope P = oracle::hull_polytope(Pv);
  const HPolytope S = oracle::hull_polytope(Sv);
  const HPolytope D = pontryagin_diff(P, SupportSet::polytope(S));
  ASSERT_FALSE(D.is_empty());
  int tested = 0;
  while (tested < 1000) {
    const Vector2d x(2 * u(rng), 2 * u(rng));
    if (!contains_point(D, x)) continue;
    for (const auto& s : Sv) EXPECT_TRUE(contains_point(P, x + s, 1e-8));
    ++tested;
  }
}

TEST(IntersectReduce, DropsLooseBox) {
  const HPolytope R = intersect_reduce(box2(-1, 1), box2(-2, 2));
  EXPECT_EQ(R.rows(), 4);
  ASSERT_TRUE(R.axis_box().has_value());
  EXPECT_TRUE(R.axis_box()->second.isApprox(VectorXd::Ones(2)));
}

TEST(IntersectReduce, OverlappingBoxes) {
  const HPolytope R = intersect_reduce(box2(0, 2), box2(1, 3));
  ASSERT_TRUE(R.axis_box().has_value());
  EXPECT_TRUE(R.axis_box()->first.isApprox(VectorXd::Ones(2)));
  EXPECT_TRUE(R.axis_box()->second.isApprox(VectorXd::Constant(2, 2.0)));
}

TEST(IntersectReduce, DisjointIsFlaggedEmpty) {
  EXPECT_TRUE(intersect_reduce(box2(0, 1), box2(2, 3)).is_empty());
}

TEST(IntersectReduce, RandomPolytopesMatchConjunction) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    auto random20 = [&] {
      MatrixXd C(20, 2);
      VectorXd d(20);
      for (int i = 0; i < 20; ++i) {
        const double a = 2 * M_PI * (i + 0.5 * u(rng)) / 20;
        C.row(i) << std::cos(a), std::sin(a);
        d(i) = 1.0 + 0.5 * u(rng);
      }
      return HPolytope(C, d);
    };
    const HPolytope P = random20(), Q = random20();
    const HPolytope R = intersect_reduce(P, Q);
    EXPECT_LE(R.rows(), 40);
    for (int k = 0; k < 1000; ++k) {
      const VectorXd x = v2(1.6 * u(rng), 1.6 * u(rng));
      const double mP = (P.d() - P.C() * x).minCoeff();
      const double mQ = (Q.d() - Q.C() * x).minCoeff();
      if (std::abs(std::min(mP, mQ)) < 1e-7) continue;
      EXPECT_EQ(contains_point(R, x), mP > 0 && mQ > 0);
    }
    EXPECT_EQ(reduce(R).rows(), R.rows());
  }
}

TEST(PreSet, HalfIdentity) {
  const HPolytope R = pre_set(box2(-1, 1), 0.5 * MatrixXd::Identity(2, 2));
  for (const auto& l : circle_directions(8))
    EXPECT_NEAR(support(R, l), support(box2(-2, 2), l), 1e-12);
}

TEST(PreSet, IdentityMapKeepsRows) {
  const HPolytope P = triangle();
  const HPolytope R = pre_set(P, MatrixXd::Identity(2, 2));
  EXPECT_EQ(R.rows(), P.rows());
  EXPECT_TRUE(R.C().isApprox(P.C()));
  EXPECT_TRUE(R.d().isApprox(P.d()));
}

TEST(PreSet, RotationByDefinition) {
  MatrixXd A(2, 2);
  A << 0, -1, 1, 0;
  const HPolytope P = HPolytope::box(v2(-1, -1), v2(2, 1));
  const HPolytope R = pre_set(P, A);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 1000; ++k) {
    const VectorXd x = v2(u(rng), u(rng));
    const double m = (P.d() - P.C() * (A * x)).minCoeff();
    if (std::abs(m) < 1e-9) continue;
    EXPECT_EQ(contains_point(R, x), m > 0);
  }
}

TEST(ProjectFm, CubeOntoTwoCoordinates) {
  const HPolytope cube = HPolytope::symmetric_box(VectorXd::Ones(3));
  const HPolytope R = project_fm(cube, {1, 2});
  EXPECT_EQ(R.dim(), 2);
  for (const auto& l : circle_directions(16)) EXPECT_NEAR(support(R, l), support(box2(-1, 1), l), 1e-12);
}

TEST(ProjectFm, IntervalArithmetic) {
  MatrixXd C(4, 2);
  C << 1, 1, -1, -1, 0, 1, 0, -1;
  VectorXd d(4);
  d << 1, 1, 0.5, 0.5;
  const HPolytope R = project_fm(HPolytope(C, d), {0});
  VectorXd e(1);
  e << 1;
  EXPECT_NEAR(support(R, e), 1.5, 1e-12);
  EXPECT_NEAR(support(R, -e), 1.5, 1e-12);
}

TEST(ProjectFm, RandomShadowsMatchVertexProjection) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (int t = 0; t < 8; ++t) {
    MatrixXd C(14, 3);
    VectorXd d(14);
    for (int i = 0; i < 14; ++i) {
      C.row(i) << g(rng), g(rng), g(rng);
      d(i) = u(rng) * C.row(i).norm();
    }
    // Keep it bounded.
    MatrixXd Cb(20, 3);
    VectorXd db(20);
    Cb << C, MatrixXd::Identity(3, 3), -MatrixXd::Identity(3, 3);
    db << d, VectorXd::Constant(6, 2.0);
    const HPolytope P(Cb, db);
    const HPolytope R = project_fm(P, {0, 2});
    std::vector<Vector2d> shadow;
    for (const auto& v : oracle::vertices3d(P)) shadow.emplace_back(v(0), v(2));
    ASSERT_GE(shadow.size(), 4u);
    for (const auto& l : circle_directions(64))
      EXPECT_NEAR(support(R, l), oracle::support_points(shadow, l), 1e-8);
  }
}

TEST(ProjectFm, RowGuardThrows) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  MatrixXd C(60, 4);
  for (int i = 0; i < 60; ++i) C.row(i) << g(rng), g(rng), g(rng), g(rng);
  const HPolytope P(C, VectorXd::Ones(60));
  EXPECT_THROW(project_fm(P, {0}, 50), GeometryError);
}

TEST(ContainsPoint, OriginInPcSets) {
  EXPECT_TRUE(contains_point(box2(-1, 1), VectorXd::Zero(2)));
  const auto S = SupportSet::minkowski_chain(triangle(), {MatrixXd::Identity(2, 2)});
  const auto chain = SupportSet::minkowski_chain(box2(-1, 1), {MatrixXd::Identity(2, 2)});
  EXPECT_TRUE(contains_point(chain, VectorXd::Zero(2)));
  EXPECT_TRUE(contains_point(S, v2(0.1, 0.1)));
}

TEST(ContainsPoint, JustOutsideBoxVertex) {
  const double tol = 1e-6;
  EXPECT_FALSE(contains_point(box2(-1, 1), (1 + 2 * tol) * v2(1, 1), tol));
  EXPECT_TRUE(contains_point(box2(-1, 1), (1 + 0.5 * tol) * v2(1, 1), tol));
}

TEST(ContainsPoint, ChainAgainstMinkowskiOracle) {
  const auto W = oracle::regular_polygon(4, std::sqrt(2.0), M_PI / 4);  // [-1,1]^2
  const auto sum = oracle::minkowski(W, oracle::transform(0.5 * Eigen::Matrix2d::Identity(), W));
  const auto S = SupportSet::minkowski_chain(box2(-1, 1), {MatrixXd::Identity(2, 2),
                                                          0.5 * MatrixXd::Identity(2, 2)});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  int checked = 0;
  for (int k = 0; k < 500; ++k) {
    const Vector2d x(u(rng), u(rng));
    const double m = oracle::hull_margin(sum, x);
    if (std::abs(m) < 1e-6) continue;
    EXPECT_EQ(contains_point(S, x, 1e-9), m > 0) << x.transpose();
    ++checked;
  }
  EXPECT_GT(checked, 490);
}

TEST(ContainsPoint, HullOfUnionUsesConvexHull) {
  const auto a = SupportSet::polytope(HPolytope::box(v2(-1, -0.1), v2(1, 0.1)));
  const auto b = SupportSet::polytope(HPolytope::box(v2(-0.1, -1), v2(0.1, 1)));
  const auto H = SupportSet::hull_of_union({a, b});
  // In the hull but in neither member.
  EXPECT_TRUE(contains_point(H, v2(0.5, 0.4)));
  EXPECT_FALSE(contains_point(H, v2(0.6, 0.6)));
}

TEST(Gauge, BracketsTheScale) {
  const auto S = SupportSet::minkowski_chain(box2(-1, 1), {MatrixXd::Identity(2, 2)});
  const GaugeBounds g = gauge(S, v2(0.5, 0.25), 10.0, 1e-12);
  EXPECT_LE(g.lower, 0.5 + 1e-9);
  EXPECT_GE(g.upper, 0.5 - 1e-9);
  EXPECT_NEAR(g.upper, 0.5, 1e-6);
}

TEST(SampleBoundary, AxisDirectionsHitBoxFaces) {
  std::vector<VectorXd> dirs = {v2(1, 0), v2(0, 1), v2(-1, 0), v2(0, -1)};
  const auto s = sample_boundary(box2(-1, 1), dirs);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_NEAR(s[0].point(0), 1.0, 1e-12);
  EXPECT_NEAR(s[1].point(1), 1.0, 1e-12);
  EXPECT_NEAR(s[2].point(0), -1.0, 1e-12);
  EXPECT_NEAR(s[3].point(1), -1.0, 1e-12);
  for (const auto& b : s) EXPECT_NEAR(b.h, 1.0, 1e-12);
}

TEST(SampleBoundary, OuterPolygonContainsBox) {
  const auto s = sample_boundary(SupportSet::polytope(box2(-1, 1)), circle_directions(64));
  const auto poly = outer_polygon(s);
  EXPECT_EQ(poly.size(), 64u);
  const auto hull = oracle::hull2d(poly);
  for (const Vector2d c : {Vector2d(1, 1), Vector2d(-1, 1), Vector2d(1, -1), Vector2d(-1, -1)})
    EXPECT_GE(oracle::hull_margin(hull, c), -1e-12);
  EXPECT_GE(polygon_area(poly), 4.0 - 1e-12);
}

TEST(SampleBoundary, OctagonAreaWithinOnePercent) {
  const auto oct = oracle::hull2d(oracle::regular_polygon(8, 1.0, 0.1));
  const auto S = SupportSet::polytope(oracle::hull_polytope(oct));
  const auto poly = outer_polygon(sample_boundary(S, circle_directions(256)));
  const double exact = oracle::polygon_area(oct);
  EXPECT_NEAR(polygon_area(poly), exact, 0.01 * exact);
  EXPECT_GE(polygon_area(poly), exact - 1e-12);
}

TEST(Serialization, PolytopeJsonRoundTrip) {
  const HPolytope P = triangle();
  const auto j = polytope_to_json(P);
  EXPECT_TRUE(j.contains("C"));
  EXPECT_TRUE(j.contains("d"));
  EXPECT_TRUE(j.at("bounded").get<bool>());
  const HPolytope Q = polytope_from_json(j);
  // Rows are renormalized on load, which may move the last bit.
  EXPECT_LE((Q.C() - P.C()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((Q.d() - P.d()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Serialization, BoundaryCsvHeader) {
  std::ostringstream os;
  write_boundary_csv(os, sample_boundary(box2(-1, 1), circle_directions(4)));
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "lx,ly,h");
  int lines = 0;
  for (std::string l; std::getline(is, l);) ++lines;
  EXPECT_EQ(lines, 4);
}

TEST(HPolytopeType, RowsAreNormalizedAndZeroRowsDropped) {
  MatrixXd C(3, 2);
  C << 3, 4, 0, 0, -1, 0;
  VectorXd d(3);
  d << 5, 1, 1;
  const HPolytope P(C, d);
  EXPECT_EQ(P.rows(), 2);
  for (int i = 0; i < P.rows(); ++i) EXPECT_NEAR(P.C().row(i).norm(), 1.0, 1e-15);
  EXPECT_FALSE(P.is_bounded());
  EXPECT_FALSE(P.is_empty());
}
