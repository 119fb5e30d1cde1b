#include "cislunar/measurement.hpp"

#include <cmath>
#include <sstream>

#include "cislunar/errors.hpp"

namespace cislunar {

namespace {

constexpr double kMinRange = 1e-12;

void require_range(const RelativeState& rel) {
  if (!(rel.range >= kMinRange)) {
    std::ostringstream msg;
    msg << "observer and target coincide (range " << rel.range << ")";
    throw ZeroRangeError(msg.str());
  }
}

Matrix3 line_of_sight_projector(const Vector3& r, double range) {
  return Matrix3::Identity() / range - r * r.transpose() / (range * range * range);
}

}  // namespace

RelativeState relative_state(const StateVector& observer, const StateVector& target) {
  RelativeState rel{target.r - observer.r, target.v - observer.v, 0.0};
  rel.range = rel.r.norm();
  require_range(rel);
  return rel;
}

Observation observe(const RelativeState& rel) {
  require_range(rel);
  const double r = rel.range;
  Observation obs;
  obs.y = rel.r / r;
  obs.y_dot = rel.v / r - rel.r.dot(rel.v) * rel.r / (r * r * r);
  return obs;
}

Matrix6 jacobian_target(const RelativeState& rel) {
  require_range(rel);
  const double r = rel.range;
  const double r3 = r * r * r;
  const double rv = rel.r.dot(rel.v);
  const Matrix3 h11 = line_of_sight_projector(rel.r, r);
  const Matrix3 h21 = -rel.v * rel.r.transpose() / r3 -
                      (rel.r * rel.v.transpose() + rv * Matrix3::Identity()) / r3 +
                      3.0 * rv * rel.r * rel.r.transpose() / (r3 * r * r);
  Matrix6 H = Matrix6::Zero();
  H.topLeftCorner<3, 3>() = h11;
  H.bottomLeftCorner<3, 3>() = h21;
  H.bottomRightCorner<3, 3>() = h11;
  return H;
}

Matrix6x12 jacobian_augmented(const RelativeState& rel) {
  const Matrix6 target = jacobian_target(rel);
  Matrix6x12 H;
  H.leftCols<6>() = -target;
  H.rightCols<6>() = target;
  return H;
}

NoiseModel noise_covariance(double sigma, double delta_t) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("noise.sigma must be positive");
  if (!(delta_t > 0.0) || !std::isfinite(delta_t)) throw ValidationError("noise.delta_t must be positive");
  NoiseModel noise{sigma, delta_t, Matrix6::Zero()};
  const double s2 = sigma * sigma;
  noise.R.diagonal() << s2, s2, s2, Vector3::Constant(2.0 * s2 / (delta_t * delta_t));
  return noise;
}

std::pair<Vector6, Vector6> null_space_basis(const RelativeState& rel) {
  require_range(rel);
  Vector6 v1;
  v1 << rel.r, rel.v;
  Vector6 v2;
  v2 << Vector3::Zero(), rel.r;
  return {v1, v2};
}

InformationMatrix info_gain(const Matrix6& H, const NoiseModel& noise) {
  return symmetrized(H.transpose() * noise.inverse_diagonal().asDiagonal() * H);
}

Matrix12 info_gain(const Matrix6x12& H, const NoiseModel& noise) {
  return symmetrized(H.transpose() * noise.inverse_diagonal().asDiagonal() * H);
}

}  // namespace cislunar
