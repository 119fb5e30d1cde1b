#include <cmath>

#include <gtest/gtest.h>

#include "cislunar/cr3bp.hpp"
#include "cislunar/errors.hpp"
#include "cislunar/orbit_catalog.hpp"
#include "generators.hpp"

using namespace cislunar;
using cislunar::testing::Gen;
using cislunar::testing::rel_err;

namespace {

const Cr3bpParams kParams;

// Independent scalar evaluation of the pseudo-potential and its x-slope.
double scalar_potential(double x, double y, double z, double mu) {
  const double d1 = std::sqrt((x + mu) * (x + mu) + y * y + z * z);
  const double d2 = std::sqrt((x - 1.0 + mu) * (x - 1.0 + mu) + y * y + z * z);
  return 0.5 * (x * x + y * y) + (1.0 - mu) / d1 + mu / d2;
}

double axis_slope(double x, double mu) {
  const double a = x + mu;
  const double b = x - 1.0 + mu;
  return x - (1.0 - mu) * a / std::pow(std::abs(a), 3) - mu * b / std::pow(std::abs(b), 3);
}

double bisect_axis(double lo, double hi, double mu) {
  double flo = axis_slope(lo, mu);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = axis_slope(mid, mu);
    if ((fmid < 0) == (flo < 0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double x_l1() { return bisect_axis(0.5, 1.0 - kParams.mu - 1e-6, kParams.mu); }

Vector3 fd_gradient(const Vector3& r, double h) {
  Vector3 g;
  for (int a = 0; a < 3; ++a) {
    Vector3 p = r, m = r;
    p(a) += h;
    m(a) -= h;
    g(a) = (potential(p, kParams) - potential(m, kParams)) / (2 * h);
  }
  return g;
}

Matrix3 fd_hessian(const Vector3& r, double h) {
  Matrix3 H;
  for (int a = 0; a < 3; ++a) {
    Vector3 p = r, m = r;
    p(a) += h;
    m(a) -= h;
    H.col(a) = (grad_potential(p, kParams) - grad_potential(m, kParams)) / (2 * h);
  }
  return H;
}

}  // namespace

TEST(Potential, MatchesScalarFormulaOnAxis) {
  const double expected = scalar_potential(0.5, 0, 0, kParams.mu);
  EXPECT_NEAR(potential(Vector3(0.5, 0, 0), kParams), expected, 1e-14 * expected);
}

TEST(Potential, AtOrigin) {
  const double mu = kParams.mu;
  const double expected = (1 - mu) / mu + mu / (1 - mu);
  EXPECT_NEAR(potential(Vector3::Zero(), kParams), expected, 1e-13 * expected);
}

TEST(Potential, ThrowsAtPrimaries) {
  EXPECT_THROW(potential(kParams.earth_position(), kParams), SingularityError);
  EXPECT_THROW(grad_potential(kParams.moon_position(), kParams), SingularityError);
  EXPECT_THROW(hessian_potential(kParams.moon_position() + Vector3(1e-13, 0, 0), kParams), SingularityError);
}

TEST(Gradient, VanishesAtCollinearPoints) {
  const double l1 = x_l1();
  const double l2 = bisect_axis(1.0 - kParams.mu + 1e-6, 2.0, kParams.mu);
  const double l3 = bisect_axis(-2.0, -kParams.mu - 1e-6, kParams.mu);
  EXPECT_NEAR(collinear_libration_x(1, kParams), l1, 1e-12);
  EXPECT_NEAR(collinear_libration_x(2, kParams), l2, 1e-12);
  EXPECT_NEAR(collinear_libration_x(3, kParams), l3, 1e-12);
  for (double x : {l1, l2, l3}) EXPECT_LT(grad_potential(Vector3(x, 0, 0), kParams).norm(), 1e-10);
}

TEST(Gradient, PlanarZComponentIsExactlyZero) {
  EXPECT_EQ(grad_potential(Vector3(0.7, 0.3, 0.0), kParams)(2), 0.0);
}

TEST(Gradient, MatchesFiniteDifferenceAtFixedPoint) {
  const Vector3 r(0.8, 0.1, 0.05);
  EXPECT_LT(rel_err(grad_potential(r, kParams), fd_gradient(r, 1e-6)), 1e-6);
}

TEST(Hessian, SymmetricAndMatchesFiniteDifference) {
  const Vector3 r(0.83, 0, 0.05);
  const Matrix3 H = hessian_potential(r, kParams);
  EXPECT_EQ(H, H.transpose());
  EXPECT_LT(rel_err(H, fd_hessian(r, 1e-6)), 1e-5);
}

// The 1/d terms are harmonic, so only the centrifugal part contributes.
TEST(Hessian, TraceIsTwoAtL1) {
  EXPECT_NEAR(hessian_potential(Vector3(x_l1(), 0, 0), kParams).trace(), 2.0, 1e-9);
}

TEST(DerivativeProperties, RandomPointsMatchFiniteDifferences) {
  Gen gen(11);
  for (int n = 0; n < 100; ++n) {
    const Vector3 r = gen.position();
    EXPECT_LT(rel_err(grad_potential(r, kParams), fd_gradient(r, 1e-6)), 1e-5) << r.transpose();
    const Matrix3 H = hessian_potential(r, kParams);
    EXPECT_LT(rel_err(H, fd_hessian(r, 1e-6)), 1e-5) << r.transpose();
    EXPECT_NEAR(H.trace(), 2.0, 1e-9 * H.norm());
  }
}

TEST(Eom, ZeroVelocityGivesGradient) {
  const StateVector s(Vector3(0.9, 0.2, -0.1), Vector3::Zero());
  const Vector6 d = eom(s, kParams);
  EXPECT_EQ(d.head<3>(), Vector3::Zero());
  EXPECT_EQ(d.tail<3>(), grad_potential(s.r, kParams));
}

TEST(Eom, EquilibriumAtL1) {
  EXPECT_LT(eom(StateVector(Vector3(x_l1(), 0, 0), Vector3::Zero()), kParams).norm(), 1e-10);
}

TEST(Eom, VelocityAlongSpinAxisHasNoCoriolis) {
  const StateVector s(Vector3(0.4, -0.3, 0.0), Vector3(0, 0, 1));
  const Vector6 d = eom(s, kParams);
  EXPECT_EQ(d.tail<3>(), grad_potential(s.r, kParams));
}

TEST(Variational, IdentityInputReturnsJacobianBlocks) {
  const StateVector s(Vector3(0.95, 0.05, 0.1), Vector3(0.1, -0.2, 0.05));
  const Matrix6 A = dynamics_jacobian(s, kParams);
  EXPECT_EQ(variational_rhs(s, Matrix6::Identity(), kParams), A);
  EXPECT_EQ((A.topLeftCorner<3, 3>()), (Matrix3::Zero()));
  EXPECT_EQ((A.topRightCorner<3, 3>()), (Matrix3::Identity()));
  EXPECT_EQ((A.bottomLeftCorner<3, 3>()), (hessian_potential(s.r, kParams)));
  Matrix3 coriolis;
  coriolis << 0, 2, 0, -2, 0, 0, 0, 0, 0;
  EXPECT_EQ((A.bottomRightCorner<3, 3>()), (coriolis));
}

TEST(Propagate, ZeroSpanIsIdentity) {
  const StateVector s(Vector3(0.9, 0.1, 0.0), Vector3(0.0, 0.2, 0.1));
  const auto out = propagate(s, 1.5, 1.5, kParams);
  EXPECT_EQ(out.state.stacked(), s.stacked());
  EXPECT_EQ(out.stm.phi, Matrix6::Identity());
}

TEST(Propagate, RoundTripAndInverseStm) {
  const auto orbit = reference_catalog(kParams)[0];
  const double T = orbit.period;
  const auto fwd = propagate(orbit.x0, 0.0, T, kParams);
  const auto back = propagate(fwd.state, T, 0.0, kParams);
  EXPECT_LT((back.state.stacked() - orbit.x0.stacked()).norm(), 1e-9);
  EXPECT_LT((back.stm.phi * fwd.stm.phi - Matrix6::Identity()).norm(), 1e-8);
  EXPECT_LT(rel_err(back.stm.phi, Matrix6(fwd.stm.phi.inverse())), 1e-8);
}

TEST(Propagate, StmComposition) {
  const auto orbit = reference_catalog(kParams)[3];
  const auto a = propagate(orbit.x0, 0.0, 0.7, kParams);
  const auto b = propagate(a.state, 0.7, 1.9, kParams);
  const auto c = propagate(orbit.x0, 0.0, 1.9, kParams);
  EXPECT_LT(rel_err(Matrix6(b.stm.phi * a.stm.phi), c.stm.phi), 1e-8);
  EXPECT_NEAR(c.stm.phi.determinant(), 1.0, 1e-8);
}

TEST(Propagate, StmMatchesFlowMapFiniteDifferences) {
  Gen gen(5);
  const auto catalog = reference_catalog(kParams);
  for (int trial = 0; trial < 6; ++trial) {
    const auto& orbit = catalog[static_cast<std::size_t>(gen.integer(0, 9))];
    const double span = gen.uniform(0.1, 1.0) * orbit.period;
    const Matrix6 phi = propagate(orbit.x0, 0.0, span, kParams).stm.phi;
    Matrix6 fd;
    const double h = 1e-7;
    for (int c = 0; c < 6; ++c) {
      Vector6 p = orbit.x0.stacked(), m = orbit.x0.stacked();
      p(c) += h;
      m(c) -= h;
      fd.col(c) = (propagate_state(StateVector(p), 0.0, span, kParams).stacked() -
                   propagate_state(StateVector(m), 0.0, span, kParams).stacked()) /
                  (2 * h);
    }
    EXPECT_LT(rel_err(phi, fd), 1e-4) << orbit.name;
  }
}

TEST(Propagate, CollisionCourseThrows) {
  const StateVector s(kParams.moon_position() + Vector3(1e-3, 0, 0), Vector3(-5.0, 0, 0));
  EXPECT_THROW(propagate(s, 0.0, 0.01, kParams), NumericalError);
}

TEST(Jacobi, StaticStateIsTwiceThePotential) {
  const StateVector s(Vector3(0.6, 0.4, 0.1), Vector3::Zero());
  EXPECT_DOUBLE_EQ(jacobi_constant(s, kParams), 2 * potential(s.r, kParams));
}

TEST(Jacobi, ConservedOverOnePeriodForEveryCatalogOrbit) {
  for (const auto& orbit : reference_catalog(kParams)) {
    const double c0 = jacobi_constant(orbit.x0, kParams);
    for (int n = 1; n <= 8; ++n) {
      const auto s = propagate_state(orbit.x0, 0.0, orbit.period * n / 8.0, kParams);
      EXPECT_LE(rel_err(jacobi_constant(s, kParams), c0), 1e-10) << orbit.name;
    }
  }
}

TEST(Params, Validation) {
  Cr3bpParams p;
  EXPECT_NO_THROW(p.validate());
  p.mu = 0.5;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.tu = 0;
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(TrajectoryTest, RejectsBadEpochs) {
  const StateVector s(Vector3(0.9, 0, 0.1), Vector3(0, 0.2, 0));
  const std::vector<double> none;
  const std::vector<double> repeated{0.0, 0.5, 0.5};
  EXPECT_THROW(Trajectory(s, none, kParams), ValidationError);
  EXPECT_THROW(Trajectory(s, repeated, kParams), ValidationError);
}

TEST(TrajectoryTest, ReintegratesBetweenNodes) {
  const auto orbit = reference_catalog(kParams)[2];
  const std::vector<double> epochs{0.0, 1.0, 2.0, 3.0};
  const Trajectory traj(orbit.x0, epochs, kParams);
  EXPECT_EQ(traj.state_at(0.0).stacked(), orbit.x0.stacked());
  const auto direct = propagate(orbit.x0, 0.0, 1.37, kParams);
  EXPECT_LT((traj.state_at(1.37).stacked() - direct.state.stacked()).norm(), 1e-10);
  const Matrix6 phi = traj.stm(2.6, 0.4).phi;
  const Matrix6 expected =
      propagate(orbit.x0, 0.0, 2.6, kParams).stm.phi * propagate(orbit.x0, 0.0, 0.4, kParams).stm.phi.inverse();
  EXPECT_LT(rel_err(phi, expected), 1e-8);
  EXPECT_EQ(traj.stm(1.0, 1.0).phi, Matrix6::Identity());
}
