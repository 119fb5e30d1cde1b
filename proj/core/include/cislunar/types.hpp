#pragma once

#include <Eigen/Dense>

namespace cislunar {

using Vector3 = Eigen::Vector3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix3 = Eigen::Matrix3d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Matrix6x12 = Eigen::Matrix<double, 6, 12>;
using Matrix12 = Eigen::Matrix<double, 12, 12>;

/// 6x6 symmetric PSD matrix: inverse covariance, or one measurement's
/// information contribution.
using InformationMatrix = Matrix6;
/// 6x6 symmetric PSD state error covariance.
using Covariance = Matrix6;

/// Nondimensional position and velocity in the Earth-Moon rotating frame.
struct StateVector {
  Vector3 r = Vector3::Zero();
  Vector3 v = Vector3::Zero();

  StateVector() = default;
  StateVector(const Vector3& position, const Vector3& velocity) : r(position), v(velocity) {}
  explicit StateVector(const Vector6& x) : r(x.head<3>()), v(x.tail<3>()) {}

  [[nodiscard]] Vector6 stacked() const {
    Vector6 x;
    x << r, v;
    return x;
  }

  [[nodiscard]] bool all_finite() const { return r.allFinite() && v.allFinite(); }
};

/// Earth-Moon CR3BP constants: mass parameter and the canonical length (km)
/// and time (s) scales. Defaults are the published Earth-Moon values.
struct Cr3bpParams {
  double mu = 0.01215058560962404;
  double lu = 389703.264829278;
  double tu = 382981.289129055;

  /// Throws ValidationError unless 0 < mu < 0.5, lu > 0, tu > 0.
  void validate() const;

  [[nodiscard]] Vector3 earth_position() const { return {-mu, 0.0, 0.0}; }
  [[nodiscard]] Vector3 moon_position() const { return {1.0 - mu, 0.0, 0.0}; }
  [[nodiscard]] double seconds_to_tu(double seconds) const { return seconds / tu; }
  [[nodiscard]] double tu_to_seconds(double t) const { return t * tu; }
};

/// (M + M^T) / 2
template <typename Derived>
[[nodiscard]] auto symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (0.5 * (m + m.transpose())).eval();
}

}  // namespace cislunar
