#include <gtest/gtest.h>

#include <complex>
#include <random>

#include "tubempc/config.hpp"
#include "tubempc/crane.hpp"
#include "tubempc/lpv_model.hpp"
#include "tubempc/synthesis.hpp"

using namespace tubempc;

namespace {

SchedulingBox unit_box(int d) {
  SchedulingBox b;
  b.lo = VectorXd::Zero(d);
  b.hi = VectorXd::Ones(d);
  return b;
}

// Random 3-coordinate model with distinct vertex matrices.
PolytopicLPV random_model(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  SchedulingBox box;
  box.lo = Eigen::Vector3d(0.5, -1.0, 2.0);
  box.hi = Eigen::Vector3d(1.5, 3.0, 2.5);
  std::vector<LinearVertex> v;
  for (int j = 0; j < 8; ++j) {
    MatrixXd A(3, 3), B(3, 2);
    for (int i = 0; i < A.size(); ++i) A.data()[i] = g(rng);
    for (int i = 0; i < B.size(); ++i) B.data()[i] = g(rng);
    v.push_back({A, B});
  }
  const auto X = HPolytope::symmetric_box(VectorXd::Ones(3));
  const auto U = HPolytope::symmetric_box(VectorXd::Ones(2));
  return PolytopicLPV(v, box, 0.1, X, U, X);
}

PolytopicLPV crane_model() { return build_model(default_config()); }

VectorXd rest_state(double y) {
  VectorXd x = VectorXd::Zero(6);
  x(2) = y;
  return x;
}

}  // namespace

TEST(SchedulingWeights, CornerGivesIndicator) {
  const SchedulingBox box = crane_default_box();
  for (int j = 0; j < box.corners(); ++j) {
    const auto w = scheduling_weights(box, box.corner(j));
    EXPECT_FALSE(w.clamped);
    for (int k = 0; k < box.corners(); ++k) EXPECT_DOUBLE_EQ(w.sigma(k), k == j ? 1.0 : 0.0);
  }
}

TEST(SchedulingWeights, CenterIsUniform) {
  const SchedulingBox box = crane_default_box();
  const auto w = scheduling_weights(box, box.center());
  for (int k = 0; k < box.corners(); ++k) EXPECT_NEAR(w.sigma(k), 1.0 / 8.0, 1e-15);
}

TEST(SchedulingWeights, RandomPointsMatchEntrywiseInterpolation) {
  std::mt19937_64 rng(1);
  const PolytopicLPV model = random_model(rng);
  const SchedulingBox& box = model.box();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    VectorXd p(3), s(3);
    for (int i = 0; i < 3; ++i) {
      s(i) = u(rng);
      p(i) = box.lo(i) + s(i) * (box.hi(i) - box.lo(i));
    }
    const auto w = scheduling_weights(box, p);
    EXPECT_NEAR(w.sigma.sum(), 1.0, 1e-14);
    EXPECT_GE(w.sigma.minCoeff(), 0.0);
    // Trilinear interpolation written out per entry, corner by corner.
    auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
    const MatrixXd A = model.evaluate(p).A;
    const auto& V = model.vertices();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        auto e = [&](int j) { return V[j].A(r, c); };
        const double x00 = lerp(e(0), e(1), s(0)), x10 = lerp(e(2), e(3), s(0));
        const double x01 = lerp(e(4), e(5), s(0)), x11 = lerp(e(6), e(7), s(0));
        const double ref = lerp(lerp(x00, x10, s(1)), lerp(x01, x11, s(1)), s(2));
        EXPECT_NEAR(A(r, c), ref, 1e-12);
      }
  }
}

TEST(SchedulingWeights, OutsideBoxIsClampedAndFlagged) {
  const SchedulingBox box = crane_default_box();
  VectorXd p = box.center();
  p(1) = 2.5;
  const auto w = scheduling_weights(box, p);
  EXPECT_TRUE(w.clamped);
  VectorXd q = p;
  q(1) = box.hi(1);
  EXPECT_TRUE(w.sigma.isApprox(scheduling_weights(box, q).sigma));
}

TEST(Evaluate, CornersAndCenter) {
  std::mt19937_64 rng(2);
  const PolytopicLPV model = random_model(rng);
  for (int j = 0; j < 8; ++j) {
    const auto AB = model.evaluate(model.box().corner(j));
    EXPECT_EQ(AB.A, model.vertices()[j].A);
    EXPECT_EQ(AB.B, model.vertices()[j].B);
  }
  MatrixXd mean = MatrixXd::Zero(3, 3);
  for (const auto& v : model.vertices()) mean += v.A / 8.0;
  EXPECT_TRUE(model.nominal().A.isApprox(mean, 1e-14));
}

TEST(Evaluate, EntriesStayWithinVertexRange) {
  std::mt19937_64 rng(3);
  const PolytopicLPV model = random_model(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    VectorXd p(3);
    for (int i = 0; i < 3; ++i) p(i) = model.box().lo(i) + u(rng) * (model.box().hi(i) - model.box().lo(i));
    const MatrixXd A = model.evaluate(p).A;
    for (int k = 0; k < A.size(); ++k) {
      double lo = 1e300, hi = -1e300;
      for (const auto& v : model.vertices()) {
        lo = std::min(lo, v.A.data()[k]);
        hi = std::max(hi, v.A.data()[k]);
      }
      EXPECT_GE(A.data()[k], lo - 1e-12);
      EXPECT_LE(A.data()[k], hi + 1e-12);
    }
  }
}

TEST(Evaluate, AffineAlongEachCoordinate) {
  std::mt19937_64 rng(4);
  const PolytopicLPV model = random_model(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    VectorXd p1(3);
    for (int i = 0; i < 3; ++i) p1(i) = model.box().lo(i) + u(rng) * (model.box().hi(i) - model.box().lo(i));
    const int axis = t % 3;
    VectorXd p2 = p1;
    p2(axis) = model.box().lo(axis) + u(rng) * (model.box().hi(axis) - model.box().lo(axis));
    const double lam = u(rng);
    const auto a = model.evaluate(lam * p1 + (1 - lam) * p2);
    const auto e1 = model.evaluate(p1), e2 = model.evaluate(p2);
    EXPECT_LE((a.A - (lam * e1.A + (1 - lam) * e2.A)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((a.B - (lam * e1.B + (1 - lam) * e2.B)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Nominal, SymmetricPairAveragesToZero) {
  MatrixXd A(2, 2);
  A << 1, 2, 3, 4;
  const MatrixXd B = MatrixXd::Ones(2, 1);
  const auto box = unit_box(1);
  const auto X = HPolytope::symmetric_box(VectorXd::Ones(2));
  const PolytopicLPV model({{A, B}, {-A, -B}}, box, 0.1, X, HPolytope::symmetric_box(VectorXd::Ones(1)), X);
  EXPECT_TRUE(model.nominal().A.isZero(0));
  EXPECT_TRUE(model.nominal().B.isZero(0));
}

TEST(Nominal, SingleVertex) {
  MatrixXd A(2, 2);
  A << 1, 0.1, 0, 1;
  const MatrixXd B = MatrixXd::Ones(2, 1);
  const auto X = HPolytope::symmetric_box(VectorXd::Ones(2));
  const PolytopicLPV model({{A, B}}, unit_box(0), 0.1, X, HPolytope::symmetric_box(VectorXd::Ones(1)), X);
  EXPECT_EQ(model.nominal().A, A);
  EXPECT_EQ(model.nominal().B, B);
}

TEST(Nominal, CraneIsVertexMean) {
  const PolytopicLPV model = crane_model();
  ASSERT_EQ(model.num_vertices(), 8);
  MatrixXd A = MatrixXd::Zero(6, 6), B = MatrixXd::Zero(6, 2);
  for (const auto& v : model.vertices()) {
    A += v.A / 8.0;
    B += v.B / 8.0;
  }
  EXPECT_LE((model.nominal().A - A).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((model.nominal().B - B).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Linearize, RecoversLinearMap) {
  MatrixXd A(2, 2), B(2, 1);
  A << 0.3, -1.2, 4.0, 0.1;
  B << 2.0, -0.5;
  VectorXd c(2);
  c << 0.7, -0.2;
  const ContinuousDynamics f = [&](const VectorXd& x, const VectorXd& u) -> VectorXd {
    return A * x + B * u + c;
  };
  VectorXd x(2), u(1), xdot(2);
  x << 1.5, -2.0;
  u << 3.0;
  xdot = A * x + B * u;
  const auto lin = linearize(f, x, u, xdot);
  EXPECT_LE((lin.Ac - A).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((lin.Bc - B).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((lin.R - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Linearize, Square) {
  const ContinuousDynamics f = [](const VectorXd& x, const VectorXd&) -> VectorXd {
    return x.array().square().matrix();
  };
  const auto lin = linearize(f, VectorXd::Ones(1), VectorXd::Zero(1));
  EXPECT_NEAR(lin.Ac(0, 0), 2.0, 1e-6);
}

TEST(Linearize, NonFiniteThrows) {
  const ContinuousDynamics f = [](const VectorXd& x, const VectorXd&) -> VectorXd {
    return x.array().log().matrix();
  };
  EXPECT_THROW(linearize(f, -VectorXd::Ones(1), VectorXd::Zero(1)), std::domain_error);
}

TEST(Linearize, CraneMatchesComplexStep) {
  const CraneSurrogate crane;
  const double m_l = 1.5, beta_d = 0.01;
  // A generic point: carriage and lift moving, mast deflected.
  VectorXd x(6);
  x << 0.3, 0.2, 1.0, -0.1, 0.05, 0.3;
  const VectorXd u = Eigen::Vector2d(1.0, 0.0);
  const ContinuousDynamics f = [&](const VectorXd& xx, const VectorXd& uu) {
    return crane.f(xx, uu, m_l, beta_d);
  };
  for (const VectorXd& xr : {rest_state(1.0), x}) {
    const auto lin = linearize(f, xr, u);
    using C = std::complex<double>;
    const double h = 1e-30;
    for (int i = 0; i < 8; ++i) {
      Eigen::Matrix<C, 6, 1> xc = xr.cast<C>();
      Eigen::Matrix<C, 2, 1> uc = u.cast<C>();
      if (i < 6) xc(i) += C(0.0, h);
      else uc(i - 6) += C(0.0, h);
      const auto fc = crane.dynamics<C>(xc, uc, m_l, beta_d);
      for (int r = 0; r < 6; ++r) {
        const double cs = fc(r).imag() / h;
        const double fd = i < 6 ? lin.Ac(r, i) : lin.Bc(r, i - 6);
        EXPECT_NEAR(fd, cs, 1e-6) << "row " << r << " col " << i;
      }
    }
  }
}

TEST(Discretize, ZeroAndDoubleIntegrator) {
  auto [A0, B0] = discretize_euler(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), 0.03);
  EXPECT_EQ(A0, MatrixXd::Identity(2, 2));
  MatrixXd Ac(2, 2), Bc(2, 1);
  Ac << 0, 1, 0, 0;
  Bc << 0, 1;
  auto [A, B] = discretize_euler(Ac, Bc, 0.03);
  MatrixXd ref(2, 2);
  ref << 1, 0.03, 0, 1;
  EXPECT_TRUE(A.isApprox(ref, 1e-15));
  EXPECT_NEAR(B(1, 0), 0.03, 1e-15);
  EXPECT_THROW(discretize_euler(Ac, Bc, 0.0), std::invalid_argument);
}

TEST(Discretize, InverseIsExactOnCraneVertices) {
  const CraneSurrogate crane;
  const SchedulingBox box = crane_default_box();
  for (int j = 0; j < box.corners(); ++j) {
    const VectorXd p = box.corner(j);
    const auto lin = crane.rest_linearization(p(0), p(1), p(2));
    auto [A, B] = discretize_euler(lin.Ac, lin.Bc, 0.03);
    MatrixXd back = A;
    back.diagonal().array() -= 1.0;
    EXPECT_LE((back / 0.03 - lin.Ac).cwiseAbs().maxCoeff(), 1e-12 * (1 + lin.Ac.cwiseAbs().maxCoeff()));
  }
}

TEST(Discretize, CraneNominalClosedLoopIsStable) {
  const PolytopicLPV model = crane_model();
  const auto AB = model.nominal();
  const auto d = dare_solve(AB.A, AB.B, 2.5 * MatrixXd::Identity(6, 6), MatrixXd::Identity(2, 2), 1e-10);
  ASSERT_TRUE(d.converged);
  EXPECT_LT(spectral_radius(AB.A + AB.B * d.K), 1.0);
}

TEST(Crane, RestIsEquilibrium) {
  const CraneSurrogate crane;
  for (double y : {0.0, 1.0, 1.9})
    EXPECT_LE(crane.f(rest_state(y), VectorXd::Zero(2), 1.5, 0.01).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(crane.f(VectorXd::Zero(6), VectorXd::Zero(2), 0.04, 0.005).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Crane, ModalEnergyDecaysOverOneStep) {
  const CraneSurrogate crane;
  VectorXd x = rest_state(1.9);
  x(4) = 0.5;
  const double e0 = crane.energy(x, 1.5);
  const VectorXd x1 = crane.rk4_step(x, VectorXd::Zero(2), 1.5, 0.01, 0.03);
  EXPECT_LT(crane.energy(x1, 1.5), e0);
}

TEST(Crane, EnergyNonIncreasingAlongTrajectory) {
  const CraneSurrogate crane;
  for (double beta : {0.005, 0.02}) {
    VectorXd x(6);
    x << 0.2, 0.1, 1.2, 0.05, 0.3, -0.2;
    double e = crane.energy(x, 1.0);
    for (int k = 0; k < 300; ++k) {
      x = crane.rk4_step(x, VectorXd::Zero(2), 1.0, beta, 0.03);
      const double e1 = crane.energy(x, 1.0);
      EXPECT_LE(e1, e + 1e-9) << "step " << k;
      e = e1;
    }
  }
}

TEST(Crane, FrequencyFallsWithHeightAndMass) {
  const CraneSurrogate crane;
  double prev = 1e9;
  for (double y = 0.2; y <= 1.9; y += 0.1) {
    const double w = crane.clamped_frequency(y, 1.5);
    EXPECT_LT(w, prev);
    prev = w;
  }
  prev = 1e9;
  for (double m = 0.04; m <= 1.5; m += 0.1) {
    const double w = crane.clamped_frequency(1.9, m);
    EXPECT_LT(w, prev);
    prev = w;
  }
}

TEST(Crane, ModeShapeNormalization) {
  const CraneSurrogate crane;
  EXPECT_NEAR(crane.psi_hat(crane.params().L), 1.0, 1e-12);
  EXPECT_NEAR(crane.psi_hat(0.0), 0.0, 1e-15);
  EXPECT_NEAR(crane.dpsi_hat(0.0), 0.0, 1e-12);
}

TEST(Crane, VerticesReproducedByLinearizeAndDiscretize) {
  const CraneSurrogate crane;
  const PolytopicLPV model = crane_model();
  for (int j = 0; j < model.num_vertices(); ++j) {
    const VectorXd p = model.box().corner(j);
    const ContinuousDynamics f = [&](const VectorXd& x, const VectorXd& u) {
      return crane.f(x, u, p(0), p(2));
    };
    const auto lin = linearize(f, rest_state(p(1)), VectorXd::Zero(2));
    EXPECT_LE(lin.R.cwiseAbs().maxCoeff(), 1e-12);
    auto [A, B] = discretize_euler(lin.Ac, lin.Bc, model.Ts());
    EXPECT_LE((A - model.vertices()[j].A).cwiseAbs().maxCoeff(), 1e-6) << "vertex " << j;
    EXPECT_LE((B - model.vertices()[j].B).cwiseAbs().maxCoeff(), 1e-6) << "vertex " << j;
  }
}

TEST(DisturbanceSet, ExactModelGivesFloor) {
  std::mt19937_64 rng(6);
  const PolytopicLPV model = random_model(rng);
  const DiscreteDynamics f = [&](const VectorXd& x, const VectorXd& u, const VectorXd& p) -> VectorXd {
    const auto AB = model.evaluate(p);
    return AB.A * x + AB.B * u;
  };
  std::vector<DisturbanceSample> s;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 50; ++k)
    s.push_back({VectorXd::Random(3), VectorXd::Random(2), model.box().corner(k % 8)});
  const VectorXd floor = VectorXd::Constant(3, 0.01);
  const auto est = estimate_disturbance_set(model, f, s, floor);
  EXPECT_LE(est.raw.maxCoeff(), 1e-12);
  EXPECT_EQ(est.half_width, floor);
}

TEST(DisturbanceSet, ConstantOffsetInflatedByTenPercent) {
  std::mt19937_64 rng(7);
  const PolytopicLPV model = random_model(rng);
  VectorXd c(3);
  c << 0.5, -0.2, 0.0;
  const DiscreteDynamics f = [&](const VectorXd& x, const VectorXd& u, const VectorXd& p) -> VectorXd {
    const auto AB = model.evaluate(p);
    return AB.A * x + AB.B * u + c;
  };
  std::vector<DisturbanceSample> s;
  for (int k = 0; k < 20; ++k) s.push_back({VectorXd::Random(3), VectorXd::Random(2), model.box().center()});
  const auto est = estimate_disturbance_set(model, f, s, VectorXd::Constant(3, 1e-3));
  EXPECT_NEAR(est.half_width(0), 0.55, 1e-12);
  EXPECT_NEAR(est.half_width(1), 0.22, 1e-12);
  EXPECT_NEAR(est.half_width(2), 1e-3, 1e-15);
  EXPECT_THROW(estimate_disturbance_set(model, f, {}, VectorXd::Zero(3)), std::invalid_argument);
}

// The grid estimate for the surrogate is a diagnostic. Where it exceeds the
// 0.1 bound the configured W is used, so the model's W must stay inside it.
TEST(DisturbanceSet, CraneEstimateAndConfiguredBox) {
  const RunConfig cfg = default_config();
  const PolytopicLPV model = build_model(cfg);
  const CraneSurrogate crane(cfg.model.crane);
  const auto grid = crane_disturbance_grid(model.box(), cfg.constraints.x_bounds,
                                           cfg.constraints.u_bounds, 3);
  ASSERT_EQ(grid.size(), 27u * 2187u);
  const auto est = estimate_disturbance_set(model, crane_euler_map(crane, model.Ts()), grid,
                                            cfg.constraints.w_bounds);
  EXPECT_TRUE(est.raw.allFinite());
  EXPECT_GE((est.half_width - cfg.constraints.w_bounds).minCoeff(), 0.0);
  for (const auto& l : sphere_directions(6, 64, 1))
    EXPECT_LE(support(model.W(), l), 0.1 * l.lpNorm<1>() + 1e-12);
}
