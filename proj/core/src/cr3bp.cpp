#include "cislunar/cr3bp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "cislunar/errors.hpp"

namespace cislunar {

namespace odeint = boost::numeric::odeint;

void Cr3bpParams::validate() const {
  if (!(mu > 0.0 && mu < 0.5)) {
    throw ValidationError("params.mu must satisfy 0 < mu < 0.5");
  }
  if (!(lu > 0.0)) throw ValidationError("params.lu must be positive");
  if (!(tu > 0.0)) throw ValidationError("params.tu must be positive");
}

namespace {

struct PrimaryOffsets {
  Vector3 a;  // from Earth
  Vector3 b;  // from Moon
  double d1;
  double d2;
};

PrimaryOffsets offsets(const Vector3& r, const Cr3bpParams& params) {
  PrimaryOffsets o{r - params.earth_position(), r - params.moon_position(), 0.0, 0.0};
  o.d1 = o.a.norm();
  o.d2 = o.b.norm();
  if (!(o.d1 >= kRadiusFloor) || !(o.d2 >= kRadiusFloor)) {
    std::ostringstream msg;
    msg << "position within " << kRadiusFloor << " of a primary (d1=" << o.d1 << ", d2=" << o.d2 << ")";
    throw SingularityError(msg.str());
  }
  return o;
}

Vector3 coriolis_free_acceleration(const Vector3& r, const Vector3& v, const Cr3bpParams& params) {
  // grad U - 2 w x v with w = e_z: w x v = (-vy, vx, 0)
  Vector3 acc = grad_potential(r, params);
  acc.x() += 2.0 * v.y();
  acc.y() -= 2.0 * v.x();
  return acc;
}

constexpr std::size_t kJointDim = 42;
using JointState = std::array<double, kJointDim>;
using PlainState = std::array<double, 6>;

// Row-major STM packed after the 6 state entries.
void joint_rhs(const JointState& x, JointState& dxdt, const Cr3bpParams& params) {
  const Vector3 r(x[0], x[1], x[2]);
  const Vector3 v(x[3], x[4], x[5]);
  const Vector3 acc = coriolis_free_acceleration(r, v, params);
  dxdt[0] = v.x();
  dxdt[1] = v.y();
  dxdt[2] = v.z();
  dxdt[3] = acc.x();
  dxdt[4] = acc.y();
  dxdt[5] = acc.z();

  const Matrix3 hess = hessian_potential(r, params);
  const auto phi = [&x](int row, int col) { return x[6 + 6 * row + col]; };
  for (int col = 0; col < 6; ++col) {
    for (int row = 0; row < 3; ++row) {
      dxdt[6 + 6 * row + col] = phi(row + 3, col);
    }
    for (int row = 0; row < 3; ++row) {
      double s = hess(row, 0) * phi(0, col) + hess(row, 1) * phi(1, col) + hess(row, 2) * phi(2, col);
      if (row == 0) s += 2.0 * phi(4, col);
      if (row == 1) s -= 2.0 * phi(3, col);
      dxdt[6 + 6 * (row + 3) + col] = s;
    }
  }
}

template <typename State, typename System>
void integrate(State& x, double t0, double t1, const System& system, const PropagationOptions& opts) {
  if (!(std::isfinite(t0) && std::isfinite(t1))) {
    throw ValidationError("propagation epochs must be finite");
  }
  if (t1 == t0) return;

  auto stepper = odeint::make_controlled(opts.abs_tol, opts.rel_tol, odeint::runge_kutta_fehlberg78<State>());
  const double direction = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double landing = 4.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(t0), std::abs(t1)});

  double t = t0;
  double dt = direction * std::min(opts.initial_step, span);
  long steps = 0;
  while (direction * (t1 - t) > landing) {
    const double remaining = t1 - t;
    const bool clipped = std::abs(dt) > std::abs(remaining);
    double trial = clipped ? remaining : dt;
    const double before = trial;
    const auto result = stepper.try_step(system, x, t, trial);
    if (result == odeint::fail) {
      if (std::abs(trial) < opts.min_step) {
        std::ostringstream msg;
        msg << "step-size underflow at t=" << t;
        throw PropagationError(msg.str());
      }
      dt = trial;
      continue;
    }
    // A clipped landing step should not shrink the step used afterwards.
    dt = clipped ? std::max(std::abs(trial), std::abs(before)) * direction : trial;
    if (++steps > opts.max_steps) throw PropagationError("maximum number of integration steps exceeded");
    for (double value : x) {
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite state at t=" << t;
        throw PropagationError(msg.str());
      }
    }
  }
}

void require_finite(const StateVector& state) {
  if (!state.all_finite()) throw ValidationError("state vector has non-finite components");
}

}  // namespace

double potential(const Vector3& r, const Cr3bpParams& params) {
  const auto o = offsets(r, params);
  return 0.5 * (r.x() * r.x() + r.y() * r.y()) + (1.0 - params.mu) / o.d1 + params.mu / o.d2;
}

Vector3 grad_potential(const Vector3& r, const Cr3bpParams& params) {
  const auto o = offsets(r, params);
  const double k1 = (1.0 - params.mu) / (o.d1 * o.d1 * o.d1);
  const double k2 = params.mu / (o.d2 * o.d2 * o.d2);
  Vector3 g = -k1 * o.a - k2 * o.b;
  g.x() += r.x();
  g.y() += r.y();
  return g;
}

Matrix3 hessian_potential(const Vector3& r, const Cr3bpParams& params) {
  const auto o = offsets(r, params);
  const double d1_3 = o.d1 * o.d1 * o.d1;
  const double d2_3 = o.d2 * o.d2 * o.d2;
  const double d1_5 = d1_3 * o.d1 * o.d1;
  const double d2_5 = d2_3 * o.d2 * o.d2;
  const double m1 = 1.0 - params.mu;
  const double m2 = params.mu;

  Matrix3 h;
  for (int row = 0; row < 3; ++row) {
    for (int col = row; col < 3; ++col) {
      double value = 3.0 * (m1 * o.a(row) * o.a(col) / d1_5 + m2 * o.b(row) * o.b(col) / d2_5);
      if (row == col) value -= m1 / d1_3 + m2 / d2_3;
      h(row, col) = value;
      h(col, row) = value;
    }
  }
  h(0, 0) += 1.0;
  h(1, 1) += 1.0;
  return h;
}

Vector6 eom(const StateVector& state, const Cr3bpParams& params) {
  Vector6 d;
  d << state.v, coriolis_free_acceleration(state.r, state.v, params);
  return d;
}

Matrix6 dynamics_jacobian(const StateVector& state, const Cr3bpParams& params) {
  Matrix6 a = Matrix6::Zero();
  a.topRightCorner<3, 3>().setIdentity();
  a.bottomLeftCorner<3, 3>() = hessian_potential(state.r, params);
  a(3, 4) = 2.0;
  a(4, 3) = -2.0;
  return a;
}

Matrix6 variational_rhs(const StateVector& state, const Matrix6& phi, const Cr3bpParams& params) {
  return dynamics_jacobian(state, params) * phi;
}

double jacobi_constant(const StateVector& state, const Cr3bpParams& params) {
  return 2.0 * potential(state.r, params) - state.v.squaredNorm();
}

double collinear_libration_x(int point, const Cr3bpParams& params) {
  const double mu = params.mu;
  const auto dudx = [&](double x) {
    const double a = x + mu;
    const double b = x - 1.0 + mu;
    return x - (1.0 - mu) * a / std::pow(std::abs(a), 3) - mu * b / std::pow(std::abs(b), 3);
  };
  double lo = 0.0;
  double hi = 0.0;
  switch (point) {
    case 1:
      lo = -mu + 1e-9;
      hi = 1.0 - mu - 1e-9;
      break;
    case 2:
      lo = 1.0 - mu + 1e-9;
      hi = 2.0;
      break;
    case 3:
      lo = -2.0;
      hi = -mu - 1e-9;
      break;
    default:
      throw ValidationError("collinear libration point index must be 1, 2 or 3");
  }
  // dU/dx is increasing across each bracket, so plain bisection is safe.
  double f_lo = dudx(lo);
  for (int iter = 0; iter < 200 && hi - lo > 0.0; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double f_mid = dudx(mid);
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

PropagationResult propagate(const StateVector& state, double t0, double t1, const Cr3bpParams& params,
                            const PropagationOptions& opts) {
  require_finite(state);
  JointState x{};
  const Vector6 s = state.stacked();
  for (int i = 0; i < 6; ++i) x[i] = s(i);
  for (int i = 0; i < 6; ++i) x[6 + 7 * i] = 1.0;

  integrate(
      x, t0, t1, [&params](const JointState& in, JointState& out, double) { joint_rhs(in, out, params); }, opts);

  PropagationResult result;
  result.state = StateVector(Vector3(x[0], x[1], x[2]), Vector3(x[3], x[4], x[5]));
  for (int row = 0; row < 6; ++row) {
    for (int col = 0; col < 6; ++col) result.stm.phi(row, col) = x[6 + 6 * row + col];
  }
  result.stm.t_from = t0;
  result.stm.t_to = t1;
  return result;
}

StateVector propagate_state(const StateVector& state, double t0, double t1, const Cr3bpParams& params,
                            const PropagationOptions& opts) {
  require_finite(state);
  PlainState x{};
  const Vector6 s = state.stacked();
  for (int i = 0; i < 6; ++i) x[i] = s(i);
  integrate(
      x, t0, t1,
      [&params](const PlainState& in, PlainState& out, double) {
        const Vector3 r(in[0], in[1], in[2]);
        const Vector3 v(in[3], in[4], in[5]);
        const Vector3 acc = coriolis_free_acceleration(r, v, params);
        out = {v.x(), v.y(), v.z(), acc.x(), acc.y(), acc.z()};
      },
      opts);
  return StateVector(Vector3(x[0], x[1], x[2]), Vector3(x[3], x[4], x[5]));
}

Trajectory::Trajectory(const StateVector& initial, std::span<const double> epochs, const Cr3bpParams& params,
                       const PropagationOptions& opts)
    : params_(params), opts_(opts) {
  if (epochs.empty()) throw ValidationError("trajectory needs at least one epoch");
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    if (!(epochs[i] > epochs[i - 1])) throw ValidationError("trajectory epochs must be strictly increasing");
  }
  samples_.reserve(epochs.size());
  samples_.push_back({epochs[0], initial, Matrix6::Identity()});
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    const Sample& prev = samples_.back();
    const auto leg = propagate(prev.state, prev.epoch, epochs[i], params_, opts_);
    samples_.push_back({epochs[i], leg.state, leg.stm.phi * prev.stm_from_start});
  }
}

const Trajectory::Sample& Trajectory::nearest(double t) const {
  const auto it = std::lower_bound(samples_.begin(), samples_.end(), t,
                                   [](const Sample& s, double value) { return s.epoch < value; });
  if (it == samples_.begin()) return *it;
  if (it == samples_.end()) return samples_.back();
  const auto prev = std::prev(it);
  return (t - prev->epoch) <= (it->epoch - t) ? *prev : *it;
}

StateVector Trajectory::state_at(double t) const {
  const Sample& node = nearest(t);
  if (node.epoch == t) return node.state;
  return propagate_state(node.state, node.epoch, t, params_, opts_);
}

Stm Trajectory::stm(double t_to, double t_from) const {
  if (t_to == t_from) return {Matrix6::Identity(), t_from, t_to};
  const auto leg = propagate(state_at(t_from), t_from, t_to, params_, opts_);
  return leg.stm;
}

}  // namespace cislunar
