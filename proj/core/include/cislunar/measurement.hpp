#pragma once

#include <utility>

#include "cislunar/types.hpp"

namespace cislunar {

/// Target relative to observer: r_ij = r_j - r_i, v_ij = v_j - v_i.
struct RelativeState {
  Vector3 r = Vector3::Zero();
  Vector3 v = Vector3::Zero();
  double range = 0.0;
};

/// Unit line-of-sight vector and its time derivative.
struct Observation {
  Vector3 y = Vector3::Zero();
  Vector3 y_dot = Vector3::Zero();

  [[nodiscard]] Vector6 stacked() const {
    Vector6 z;
    z << y, y_dot;
    return z;
  }
};

/// Angle noise sigma (directional-cosine units), exposure time delta_t (TU)
/// and R = sigma^2 blockdiag(I, (2 / delta_t^2) I).
struct NoiseModel {
  double sigma = 0.0;
  double delta_t = 0.0;
  Matrix6 R = Matrix6::Zero();

  /// Diagonal of R^-1.
  [[nodiscard]] Vector6 inverse_diagonal() const { return R.diagonal().cwiseInverse(); }
};

/// Throws ZeroRangeError when the range falls below 1e-12.
RelativeState relative_state(const StateVector& observer, const StateVector& target);
Observation observe(const RelativeState& rel);

/// d[y; y_dot] / d[r_j; v_j] = [[H11, 0], [H21, H22]] with H11 = H22.
Matrix6 jacobian_target(const RelativeState& rel);
/// d[y; y_dot] / d[observer; target]; the observer half is the negated
/// target half.
Matrix6x12 jacobian_augmented(const RelativeState& rel);

/// Throws ValidationError unless sigma > 0 and delta_t > 0.
NoiseModel noise_covariance(double sigma, double delta_t);

/// v1 = [r; v], v2 = [0; r]; both are annihilated by jacobian_target.
std::pair<Vector6, Vector6> null_space_basis(const RelativeState& rel);

/// H^T R^-1 H.
InformationMatrix info_gain(const Matrix6& H, const NoiseModel& noise);
Matrix12 info_gain(const Matrix6x12& H, const NoiseModel& noise);

}  // namespace cislunar
