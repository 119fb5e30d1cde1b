#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cislunar/cr3bp.hpp"
#include "cislunar/measurement.hpp"
#include "cislunar/types.hpp"

namespace cislunar {

/// Decision epochs t_k = t_0 + k (delta_t + eps_t), measurement epochs at
/// mid-exposure t_k' = t_k + delta_t / 2, and evaluation epoch
/// t_L = t_{L-1} + delta_t + eps_t.
struct Schedule {
  std::vector<double> t;
  std::vector<double> t_prime;
  double delta_t = 0.0;
  double eps_t = 0.0;
  double t_L = 0.0;

  /// Throws ValidationError unless steps >= 1, delta_t > 0, eps_t >= 0.
  static Schedule make(double t0, int steps, double delta_t, double eps_t);
  [[nodiscard]] int steps() const { return static_cast<int>(t.size()); }
  /// t_0, every t_k' and t_L: the nodes a nominal trajectory needs.
  [[nodiscard]] std::vector<double> trajectory_epochs() const;
};

/// Dense M x N x L array indexed (observer i, target j, step k).
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int observers, int targets, int steps, T fill = T{})
      : m_(observers), n_(targets), l_(steps), data_(static_cast<std::size_t>(observers * targets * steps), fill) {}

  [[nodiscard]] int observers() const { return m_; }
  [[nodiscard]] int targets() const { return n_; }
  [[nodiscard]] int steps() const { return l_; }
  [[nodiscard]] T& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  [[nodiscard]] const T& operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }
  [[nodiscard]] const std::vector<T>& data() const { return data_; }
  bool operator==(const Tensor3&) const = default;

 private:
  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(l_) +
           static_cast<std::size_t>(k);
  }

  int m_ = 0;
  int n_ = 0;
  int l_ = 0;
  std::vector<T> data_;
};

/// w(i, j, k) = trace of the information from observer i measuring target j
/// at t_k', mapped to t_L.
using WeightTensor = Tensor3<double>;
/// u(i, j, k) in {0, 1}.
using Allocation = Tensor3<std::uint8_t>;

struct TaskingConstraints {
  /// Every target must be observed at least this many times.
  int min_observations = 2;
};

enum class Objective { MaxTrace, MaxMin, Myopic };
enum class Optimality { Proven, Heuristic };

std::string_view to_string(Objective objective);
std::string_view to_string(Optimality optimality);
/// Accepts max-trace / max_trace, max-min / max_min, myopic.
Objective objective_from_string(std::string_view name);

struct SolveReport {
  Objective policy = Objective::MaxTrace;
  Allocation allocation;
  /// Sum of selected weights (max-trace, myopic) or the smallest per-target
  /// total including offsets (max-min).
  double objective = 0.0;
  std::vector<double> per_target_traces;
  Optimality optimality = Optimality::Proven;
  long long nodes_explored = 0;
  double wall_time_ms = 0.0;
  bool coverage_feasible = true;
};

struct SolverOptions {
  /// Past this many nodes the search stops and the incumbent is reported as
  /// heuristic.
  long long node_limit = 20'000'000;
  /// Added to each target's total before taking the minimum (max-min only),
  /// e.g. the trace of the propagated prior information.
  std::vector<double> target_offsets;
  /// Feasible allocations used to seed the incumbent.
  std::vector<Allocation> warm_starts;
};

/// Projected and instantaneous information for every (i, j, k).
struct WeightModel {
  WeightTensor projected;
  WeightTensor instantaneous;
  /// phi_j(t_k', t_L)^T H^T R^-1 H phi_j(t_k', t_L) for every (i, j, k).
  Tensor3<InformationMatrix> projected_info;
};

/// Trajectories must reach t_L (see Schedule::trajectory_epochs). Throws
/// InfeasibleError when M L < min_observations N and ZeroRangeError on
/// coincident observer/target.
WeightModel build_weight_model(std::span<const Trajectory> observers, std::span<const Trajectory> targets,
                               const NoiseModel& noise, const Schedule& schedule,
                               const TaskingConstraints& constraints = {});
WeightTensor build_weights(std::span<const Trajectory> observers, std::span<const Trajectory> targets,
                           const NoiseModel& noise, const Schedule& schedule,
                           const TaskingConstraints& constraints = {});

/// Depth-first branch-and-bound, exact unless the node limit is hit.
/// Throws InfeasibleError when coverage cannot be met.
SolveReport solve_max_trace(const WeightTensor& weights, const TaskingConstraints& constraints = {},
                            const SolverOptions& options = {});
SolveReport solve_max_min(const WeightTensor& weights, const TaskingConstraints& constraints = {},
                          const SolverOptions& options = {});

/// Per step, each observer takes the target with the largest instantaneous
/// weight (lowest index on ties). Coverage is reported, not enforced.
SolveReport myopic_policy(const WeightTensor& instantaneous, const TaskingConstraints& constraints = {});

/// Exhaustive search over (N + 1)^(M L) assignments. Throws ValidationError
/// above 1e7 assignments and InfeasibleError when nothing is feasible.
SolveReport brute_force_oracle(const WeightTensor& weights, Objective objective,
                               const TaskingConstraints& constraints = {}, const SolverOptions& options = {});

struct AllocationCheck {
  std::vector<double> per_target_traces;
  std::vector<int> per_target_counts;
  double total = 0.0;
  bool single_observation_ok = true;
  bool coverage_ok = true;
};

AllocationCheck validate_allocation(const Allocation& allocation, const WeightTensor& weights,
                                    const TaskingConstraints& constraints = {});

}  // namespace cislunar
