#pragma once

#include <span>
#include <vector>

#include "cislunar/types.hpp"

namespace cislunar {

/// Distances below this (nondimensional) from either primary are treated as
/// collisions.
inline constexpr double kRadiusFloor = 1e-12;

/// U = (x^2 + y^2)/2 + (1 - mu)/d1 + mu/d2
double potential(const Vector3& r, const Cr3bpParams& params);
Vector3 grad_potential(const Vector3& r, const Cr3bpParams& params);
Matrix3 hessian_potential(const Vector3& r, const Cr3bpParams& params);

/// [v; grad U(r) - 2 w x v] with w = (0, 0, 1).
Vector6 eom(const StateVector& state, const Cr3bpParams& params);

/// Jacobian of the equations of motion, A = [[0, I], [hess U, Omega]] with
/// Omega the Coriolis block [[0, 2, 0], [-2, 0, 0], [0, 0, 0]].
Matrix6 dynamics_jacobian(const StateVector& state, const Cr3bpParams& params);

/// A(state) * phi, the right-hand side of the STM differential equation.
Matrix6 variational_rhs(const StateVector& state, const Matrix6& phi, const Cr3bpParams& params);

/// Jacobi integral 2U(r) - |v|^2.
double jacobi_constant(const StateVector& state, const Cr3bpParams& params);

/// x coordinate of the collinear libration point L1, L2 or L3 (1-based index).
double collinear_libration_x(int point, const Cr3bpParams& params);

struct PropagationOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  double initial_step = 1e-4;
  /// Smallest step magnitude accepted before reporting step-size underflow.
  double min_step = 1e-14;
  long max_steps = 5'000'000;
};

/// State transition matrix phi(t_to, t_from).
struct Stm {
  Matrix6 phi = Matrix6::Identity();
  double t_from = 0.0;
  double t_to = 0.0;
};

struct PropagationResult {
  StateVector state;
  Stm stm;
};

/// Jointly integrates the state and phi(t1, t0) (42 equations) from t0 to t1.
/// t1 < t0 integrates backward. Throws SingularityError or PropagationError.
PropagationResult propagate(const StateVector& state, double t0, double t1, const Cr3bpParams& params,
                            const PropagationOptions& opts = {});

/// State-only integration (6 equations).
StateVector propagate_state(const StateVector& state, double t0, double t1, const Cr3bpParams& params,
                            const PropagationOptions& opts = {});

/// Nominal trajectory stored at a strictly increasing set of epochs. Values
/// between nodes come from re-integrating out of the nearest node, never from
/// polynomial interpolation.
class Trajectory {
 public:
  struct Sample {
    double epoch = 0.0;
    StateVector state;
    Matrix6 stm_from_start = Matrix6::Identity();
  };

  /// Integrates `initial` from epochs.front() through every epoch.
  /// Throws ValidationError if epochs are empty or not strictly increasing.
  Trajectory(const StateVector& initial, std::span<const double> epochs, const Cr3bpParams& params,
             const PropagationOptions& opts = {});

  [[nodiscard]] const std::vector<Sample>& samples() const { return samples_; }
  [[nodiscard]] double start() const { return samples_.front().epoch; }
  [[nodiscard]] double end() const { return samples_.back().epoch; }
  [[nodiscard]] const Cr3bpParams& params() const { return params_; }

  [[nodiscard]] StateVector state_at(double t) const;
  /// phi(t_to, t_from), integrated directly from the state at t_from.
  [[nodiscard]] Stm stm(double t_to, double t_from) const;

 private:
  [[nodiscard]] const Sample& nearest(double t) const;

  std::vector<Sample> samples_;
  Cr3bpParams params_;
  PropagationOptions opts_;
};

}  // namespace cislunar
