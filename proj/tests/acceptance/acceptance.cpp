// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cislunar/errors.hpp"
#include "cislunar/filters.hpp"
#include "cislunar/info_analysis.hpp"
#include "cislunar/measurement.hpp"
#include "cislunar/orbit_catalog.hpp"
#include "cislunar/scenario.hpp"
#include "cislunar/tasking.hpp"
#include "generators.hpp"

using namespace cislunar;
using cislunar::testing::data_path;
using cislunar::testing::Gen;
using cislunar::testing::rel_err;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const Cr3bpParams kParams;

const std::vector<PeriodicOrbit>& catalog() {
  static const std::vector<PeriodicOrbit> c = load_catalog(data_path("catalog.json"));
  return c;
}

Outcome dynamics() {
  const auto start = Clock::now();
  double worst_jacobi = 0;
  for (const auto& orbit : catalog()) {
    const double c0 = jacobi_constant(orbit.x0, kParams);
    const double c1 = jacobi_constant(propagate_state(orbit.x0, 0.0, orbit.period, kParams), kParams);
    worst_jacobi = std::max(worst_jacobi, std::abs(c1 - c0) / std::abs(c0));
  }
  Gen gen(101);
  double worst_stm = 0;
  for (int n = 0; n < 20; ++n) {
    const auto& orbit = catalog()[static_cast<std::size_t>(gen.integer(0, static_cast<int>(catalog().size()) - 1))];
    const double t = gen.uniform(0.05, 1.0) * orbit.period;
    const Matrix6 phi = propagate(orbit.x0, 0.0, t, kParams).stm.phi;
    Matrix6 fd;
    const Vector6 x = orbit.x0.stacked();
    for (int c = 0; c < 6; ++c) {
      const double h = 1e-7;
      Vector6 xp = x, xm = x;
      xp(c) += h;
      xm(c) -= h;
      fd.col(c) = (propagate_state(StateVector(xp), 0.0, t, kParams).stacked() -
                   propagate_state(StateVector(xm), 0.0, t, kParams).stacked()) /
                  (2 * h);
    }
    worst_stm = std::max(worst_stm, rel_err(fd, phi));
  }
  const double elapsed = seconds_since(start);
  return {worst_jacobi <= 1e-10 && worst_stm <= 1e-4 && elapsed < 30.0,
          fmt("max Jacobi drift %.3e (<= 1e-10), max STM vs FD %.3e (<= 1e-4), %.2f s (< 30 s)", worst_jacobi,
              worst_stm, elapsed)};
}

Outcome measurement_jacobian() {
  Gen gen(102);
  double worst_fd = 0, worst_null = 0, worst_rank = 0;
  int rank_failures = 0;
  for (int n = 0; n < 100; ++n) {
    const StateVector obs = gen.state(), tgt = gen.state();
    const RelativeState rel = relative_state(obs, tgt);
    const Matrix6x12 H = jacobian_augmented(rel);
    Matrix6x12 fd;
    Eigen::Matrix<double, 12, 1> x;
    x << obs.stacked(), tgt.stacked();
    const auto measure = [](const Eigen::Matrix<double, 12, 1>& z) {
      return observe(relative_state(StateVector(Vector6(z.head<6>())), StateVector(Vector6(z.tail<6>())))).stacked();
    };
    for (int c = 0; c < 12; ++c) {
      const double h = 1e-6;
      auto xp = x, xm = x;
      xp(c) += h;
      xm(c) -= h;
      fd.col(c) = (measure(xp) - measure(xm)) / (2 * h);
    }
    worst_fd = std::max(worst_fd, rel_err(fd, H));

    const Matrix6 Ht = jacobian_target(rel);
    const auto [v1, v2] = null_space_basis(rel);
    worst_null = std::max({worst_null, (Ht * v1).norm() / (Ht.norm() * v1.norm()),
                           (Ht * v2).norm() / (Ht.norm() * v2.norm())});
    const Eigen::JacobiSVD<Matrix6> svd(Ht);
    const Vector6 s = svd.singularValues();
    worst_rank = std::max(worst_rank, s(4) / s(0));
    if (!(s(3) > 1e-10 * s(0) && s(4) <= 1e-10 * s(0) && s(5) <= 1e-10 * s(0))) ++rank_failures;
  }
  return {worst_fd <= 1e-5 && worst_null <= 1e-10 && rank_failures == 0,
          fmt("max FD rel err %.3e (<= 1e-5), max |H v|/(|H||v|) %.3e (<= 1e-10), max s5/s1 %.3e, rank-4 "
              "failures %d",
              worst_fd, worst_null, worst_rank, rank_failures)};
}

Outcome informative_space() {
  // Geometries with r perpendicular to v, where [0; r x v] is an exact
  // eigenvector of the information matrix.
  Gen gen(103);
  double worst_position = 0, worst_velocity = 0, worst_eigvec = 0, worst_derived = 0, ratio = 0;
  for (int n = 0; n < 100; ++n) {
    const Vector3 r = gen.log_uniform(1e-2, 1.0) * gen.unit3();
    Vector3 v = gen.vec3(0.3);
    v -= v.dot(r) / r.squaredNorm() * r;
    const double sigma = gen.log_uniform(1e-6, 1e-3), dt = gen.log_uniform(1e-4, 1e-2);
    const RelativeState rel = relative_state(StateVector(), StateVector(r, v));
    const auto noise = noise_covariance(sigma, dt);
    const Matrix6 info = info_gain(jacobian_target(rel), noise);
    const double range = r.norm();

    const Vector3 normal = r.cross(v).normalized();
    Vector6 pos = Vector6::Zero();
    pos.head<3>() = normal;
    const Vector6 pos_image = info * pos;
    const double pos_value = pos.dot(pos_image);
    worst_eigvec = std::max(worst_eigvec, (pos_image - pos_value * pos).norm() / pos_image.norm());
    worst_position = std::max(worst_position, rel_err(pos_value, 1.0 / (sigma * sigma * range * range)));

    Vector6 vel = Vector6::Zero();
    vel.tail<3>() = normal;
    const Vector6 image = info * vel;
    const double vel_value = vel.dot(image);
    worst_eigvec = std::max(worst_eigvec, (image - vel_value * vel).norm() / image.norm());
    const double stated = std::pow(dt, 4) / (4 * sigma * sigma * range * range);
    worst_velocity = std::max(worst_velocity, rel_err(vel_value, stated));
    worst_derived = std::max(worst_derived, rel_err(vel_value, dt * dt / (2 * sigma * sigma * range * range)));
    ratio = vel_value / stated;
  }
  return {worst_position <= 1e-9 && worst_velocity <= 1e-9 && worst_eigvec <= 1e-9,
          fmt("[r_perp;0] value rel err %.3e (<= 1e-9); eigenvector residual %.3e; [0;r v_perp] value vs "
              "dt^4/(4 sigma^2 r^2) rel err %.3e (<= 1e-9), last measured/stated = %.6e; vs dt^2/(2 sigma^2 r^2) "
              "rel err %.3e",
              worst_position, worst_eigvec, worst_velocity, ratio, worst_derived)};
}

Outcome filter_equivalence() {
  Gen gen(104);
  // Draws keep cond(L) moderate: comparing P^-1 with L cannot beat
  // cond * eps whatever the filter form.
  double worst_pipeline = 0, worst_cond = 1;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix6 P = gen.spd(6, 100);
    Matrix6 L = P.inverse();
    const auto noise = noise_covariance(gen.log_uniform(0.05, 0.5), gen.uniform(0.1, 1.0));
    for (int k = 0; k < 50; ++k) {
      const Matrix6 phi = Matrix6::Identity() + gen.matrix(6, 6, 0.05);
      P = ekf_predict(P, phi, Matrix6::Zero());
      L = eif_predict_noiseless(L, phi.inverse());
      const Vector3 r = gen.uniform(0.1, 1.0) * gen.unit3();
      const Matrix6 H = jacobian_target(relative_state(StateVector(), StateVector(r, gen.vec3(0.3))));
      P = ekf_update(P, H, noise.R).P;
      L = eif_update(L, H, noise.R);
      worst_pipeline = std::max(worst_pipeline, rel_err(Matrix6(P.inverse()), L));
      const Eigen::JacobiSVD<Matrix6> svd(L);
      worst_cond = std::max(worst_cond, svd.singularValues()(0) / svd.singularValues()(5));
    }
  }

  double worst_woodbury = 0;
  for (int n = 0; n < 1000; ++n) {
    const int k = gen.integer(1, 6);
    const Eigen::MatrixXd A = gen.spd(6, 100);
    const Eigen::MatrixXd U = gen.matrix(6, k);
    const Eigen::MatrixXd C = gen.spd(k, 100);
    const Eigen::MatrixXd dense = (A + U * C * U.transpose()).inverse();
    worst_woodbury = std::max(worst_woodbury, rel_err(woodbury_inverse(A.inverse(), U, C, U.transpose()), dense));
  }

  double worst_closed = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto& orbit = catalog()[static_cast<std::size_t>(trial)];
    std::vector<double> epochs;
    for (int k = 0; k <= 8; ++k) epochs.push_back(0.05 * k);
    const Trajectory traj(orbit.x0, epochs, kParams);
    const double tL = epochs.back();
    const auto noise = noise_covariance(1e-4, 0.01);
    const Matrix6 L0 = gen.spd(6, 10);
    std::vector<InfoMeasurement> batch;
    Matrix6 L = L0;
    for (std::size_t k = 1; k + 1 < epochs.size(); ++k) {
      const Vector3 r = gen.log_uniform(1e-2, 1.0) * gen.unit3();
      const Matrix6 H = jacobian_target(relative_state(StateVector(), StateVector(r, gen.vec3(0.3))));
      batch.push_back({traj.stm(epochs[k], tL).phi, H, noise.R});
      L = eif_predict_noiseless(L, traj.stm(epochs[k - 1], epochs[k]).phi);
      L = eif_update(L, H, noise.R);
    }
    L = eif_predict_noiseless(L, traj.stm(epochs[epochs.size() - 2], tL).phi);
    worst_closed =
        std::max(worst_closed, rel_err(propagate_info_multistep(L0, batch, traj.stm(epochs.front(), tL).phi).total, L));
  }
  return {worst_pipeline <= 1e-8 && worst_woodbury <= 1e-10 && worst_closed <= 1e-10,
          fmt("EKF vs EIF %.3e (<= 1e-8, max cond(L) %.1e), Woodbury vs dense %.3e (<= 1e-10), closed form vs recursion %.3e "
              "(<= 1e-10)",
              worst_pipeline, worst_cond, worst_woodbury, worst_closed)};
}

Outcome bounds() {
  const auto start = Clock::now();
  Gen gen(105);
  int violations = 0, propagated = 0;
  for (int n = 0; n < 1000; ++n) {
    Matrix6 phi;
    if (n % 4 == 0) {
      const auto& orbit = catalog()[static_cast<std::size_t>(gen.integer(0, 9))];
      phi = propagate(orbit.x0, 0.0, -gen.uniform(0.05, 1.0) * orbit.period, kParams).stm.phi;
      ++propagated;
    } else {
      phi = gen.matrix(6, 6, gen.log_uniform(0.1, 100.0));
    }
    const Vector3 r = gen.log_uniform(1e-2, 1.0) * gen.unit3();
    const Matrix6 H = jacobian_target(relative_state(StateVector(), StateVector(r, gen.vec3(0.3))));
    const auto noise = noise_covariance(gen.log_uniform(1e-6, 1e-2), gen.log_uniform(1e-4, 1.0));
    const auto b = theorem1_bounds(H, noise.R, phi);
    if (!(b.lower <= b.actual * (1 + 1e-9) && b.actual <= b.upper * (1 + 1e-9))) ++violations;
  }
  const double elapsed = seconds_since(start);
  return {violations == 0 && elapsed < 10.0,
          fmt("%d violations in 1000 instances (%d CR3BP-propagated), %.2f s (< 10 s)", violations, propagated,
              elapsed)};
}

Outcome solver_exactness() {
  const auto start = Clock::now();
  Gen gen(106);
  int mismatches = 0, feasible = 0;
  for (int n = 0; n < 200; ++n) {
    const int M = gen.integer(1, 2), N = gen.integer(1, 2), L = gen.integer(1, 3);
    const WeightTensor w = gen.weights(M, N, L, 0.0, 1.0);
    for (Objective objective : {Objective::MaxTrace, Objective::MaxMin}) {
      const auto solve = [&] {
        return objective == Objective::MaxTrace ? solve_max_trace(w) : solve_max_min(w);
      };
      bool oracle_infeasible = false, solver_infeasible = false;
      SolveReport oracle, got;
      try {
        oracle = brute_force_oracle(w, objective);
      } catch (const InfeasibleError&) {
        oracle_infeasible = true;
      }
      try {
        got = solve();
      } catch (const InfeasibleError&) {
        solver_infeasible = true;
      }
      if (oracle_infeasible || solver_infeasible) {
        if (oracle_infeasible != solver_infeasible) ++mismatches;
        continue;
      }
      ++feasible;
      const auto check = validate_allocation(got.allocation, w);
      const double achieved = objective == Objective::MaxTrace
                                  ? check.total
                                  : *std::min_element(check.per_target_traces.begin(), check.per_target_traces.end());
      if (got.optimality != Optimality::Proven || !check.coverage_ok || !check.single_observation_ok ||
          rel_err(got.objective, oracle.objective) > 1e-12 || rel_err(achieved, oracle.objective) > 1e-12) {
        ++mismatches;
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < 60.0,
          fmt("%d mismatches over 200 instances x 2 objectives (%d feasible solves), %.2f s (< 60 s)", mismatches,
              feasible, elapsed)};
}

Outcome table_ordering() {
  Scenario s = load_scenario(data_path("tables23.json"));
  s.analysis_grid = 0;
  const RunReport report = run_pipeline(s, {Objective::Myopic, Objective::MaxTrace, Objective::MaxMin});
  const PolicyResult *myopic = nullptr, *trace = nullptr, *maxmin = nullptr;
  for (const auto& p : report.policies) {
    if (p.solve.policy == Objective::Myopic) myopic = &p;
    if (p.solve.policy == Objective::MaxTrace) trace = &p;
    if (p.solve.policy == Objective::MaxMin) maxmin = &p;
  }
  if (!myopic || !trace || !maxmin) return {false, "missing policy"};
  const double tol = 1 + 1e-12;
  bool ok = trace->metrics.sum_trace * tol >= maxmin->metrics.sum_trace;
  ok &= maxmin->metrics.min_trace * tol >= trace->metrics.min_trace;
  ok &= maxmin->metrics.min_trace * tol >= myopic->metrics.min_trace;
  if (myopic->solve.coverage_feasible) ok &= trace->metrics.sum_trace * tol >= myopic->metrics.sum_trace;
  return {ok, fmt("sum Tr: myopic %.4e%s, max_trace %.4e, max_min %.4e; min Tr: myopic %.4e, max_trace %.4e, "
                  "max_min %.4e (%s)",
                  myopic->metrics.sum_trace, myopic->solve.coverage_feasible ? "" : " [coverage-infeasible]",
                  trace->metrics.sum_trace, maxmin->metrics.sum_trace, myopic->metrics.min_trace,
                  trace->metrics.min_trace, maxmin->metrics.min_trace,
                  std::string(to_string(maxmin->solve.optimality)).c_str())};
}

Outcome deformation() {
  const auto& orbit = find_orbit(catalog(), "DF_5.55");
  std::vector<double> grid;
  for (int n = 0; n <= 200; ++n) grid.push_back(orbit.period * n / 200.0);
  const Trajectory traj(orbit.x0, grid, kParams);
  const auto series = deformation_timeseries(traj, orbit.period, grid);
  std::size_t peak = 0;
  for (std::size_t n = 1; n + 1 < series.size(); ++n) {
    if (series[n].sigma_max > series[n - 1].sigma_max && series[n].sigma_max > series[n + 1].sigma_max &&
        (peak == 0 || series[n].sigma_max > series[peak].sigma_max)) {
      peak = n;
    }
  }
  if (peak == 0) return {false, fmt("%s (index %.1f): no interior local maximum", orbit.name.c_str(),
                                    orbit.stability_index)};
  const auto cloud = backward_perturbation_samples(traj, orbit.period, series[peak].t, 1000, 1e-8, 7);
  const double e1 = std::abs(cloud.sample_std(0) / cloud.predicted_std(0) - 1);
  const double e2 = std::abs(cloud.sample_std(1) / cloud.predicted_std(1) - 1);
  return {orbit.stability_index > 10 && e1 <= 0.1 && e2 <= 0.1,
          fmt("%s (index %.1f): interior peak sigma_max %.4e at %.3f of a period back; MC spread vs linear "
              "prediction %.3f, %.3f (<= 0.10)",
              orbit.name.c_str(), orbit.stability_index, series[peak].sigma_max,
              1.0 - series[peak].t / orbit.period, e1, e2)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "cislunar_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string base = std::string(CISLUNAR_TASKER_EXE) + " solve --objective all --scenario " +
                           data_path("tables23.json") + " --out ";
  for (const char* run : {"a", "b"}) {
    const std::string cmd = base + (root / run).string() + " > " + (root / (std::string(run) + ".log")).string() + " 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "solve run failed: " + cmd};
  }
  int files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    const auto name = entry.path().filename();
    if (name == "timings.json") continue;
    ++files;
    if (!fs::exists(root / "b" / name) || slurp(entry.path()) != slurp(root / "b" / name)) ++differing;
  }
  int count_b = 0;
  for (const auto& entry : fs::directory_iterator(root / "b")) count_b += entry.path().filename() != "timings.json";
  const bool same_stdout = slurp(root / "a.log") == slurp(root / "b.log");
  fs::remove_all(root);
  return {differing == 0 && files == count_b && files > 0 && same_stdout,
          fmt("%d report files compared, %d differ; stdout identical: %s (timings.json excluded)", files, differing,
              same_stdout ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"dynamics fidelity", dynamics},
      {"measurement jacobian", measurement_jacobian},
      {"informative-space eigenvalues", informative_space},
      {"filter equivalence", filter_equivalence},
      {"information bounds", bounds},
      {"solver exactness", solver_exactness},
      {"policy ordering", table_ordering},
      {"deformation non-monotonicity", deformation},
      {"end-to-end determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += !out.pass;
    std::printf("%s %s: %s\n", out.pass ? "PASS" : "FAIL", name, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
  return failures == 0 ? 0 : 1;
}
