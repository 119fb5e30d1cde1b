#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cislunar/cr3bp.hpp"
#include "cislunar/info_analysis.hpp"
#include "cislunar/measurement.hpp"
#include "cislunar/orbit_catalog.hpp"
#include "cislunar/tasking.hpp"

namespace cislunar {

/// Artifact defaults for fields a scenario may omit.
inline constexpr int kDefaultSteps = 20;
inline constexpr double kDefaultExposureSeconds = 100.0;
inline constexpr double kDefaultSlewSeconds = 900.0;
/// One arcsecond, used when writing scenario templates. Scenario files must
/// still state noise.sigma explicitly.
inline constexpr double kDefaultSigma = 4.85e-6;
inline constexpr int kDefaultAnalysisGrid = 50;

struct Scenario {
  Cr3bpParams params;
  std::vector<OrbitInstance> observers;
  std::vector<OrbitInstance> targets;
  double t0 = 0.0;
  int steps = kDefaultSteps;
  /// Exposure and slew/settle buffer, TU.
  double delta_t = 0.0;
  double eps_t = 0.0;
  double sigma = 0.0;
  /// Lambda(t_0) per target; zero unless configured.
  std::vector<InformationMatrix> initial_information;
  std::vector<Objective> objectives;
  TaskingConstraints constraints;
  long long node_limit = SolverOptions{}.node_limit;
  std::uint64_t seed = 0;
  /// Samples per observer-target analysis series; 0 disables them.
  int analysis_grid = kDefaultAnalysisGrid;
  /// Catalog reference kept so the scenario can be written back.
  std::optional<std::string> catalog_path;

  [[nodiscard]] Schedule schedule() const;
  [[nodiscard]] NoiseModel noise() const;
  /// Throws ValidationError on bad fields and InfeasibleError when a
  /// coverage-constrained objective cannot be met (M L < min_obs N).
  void validate() const;
};

/// Relative catalog paths resolve against `base_dir`.
Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);
/// Orbits are written by name when catalog_path is set, inline otherwise.
std::string serialize_scenario(const Scenario& scenario);

/// Scenario mirroring the bundled three-observer, seven-target layout.
Scenario reference_scenario(const std::vector<PeriodicOrbit>& catalog, const std::string& catalog_path);

/// Nominal trajectories with nodes at every schedule epoch.
std::vector<Trajectory> make_trajectories(const std::vector<OrbitInstance>& instances, const Cr3bpParams& params,
                                          const Schedule& schedule);

struct TableMetrics {
  double sum_trace = 0.0;
  double min_trace = 0.0;
  double max_sigma_max = 0.0;
  double min_sigma_max = 0.0;
};

TableMetrics table_metrics(const std::vector<InformationMatrix>& final_information);

struct PolicyResult {
  SolveReport solve;
  /// Lambda_j(t_L) = propagated prior + selected contributions.
  std::vector<InformationMatrix> final_information;
  TableMetrics metrics;
};

struct PairAnalysis {
  int observer = 0;
  int target = 0;
  std::vector<AnalysisRow> rows;
};

struct RunReport {
  Schedule schedule;
  WeightModel weights;
  /// phi_j(t_0, t_L)^T Lambda_j(t_0) phi_j(t_0, t_L)
  std::vector<InformationMatrix> prior_at_tL;
  std::vector<PolicyResult> policies;
  std::vector<PairAnalysis> analyses;
  std::uint64_t seed = 0;
};

std::vector<InformationMatrix> final_information(const WeightModel& weights, const Allocation& allocation,
                                                 const std::vector<InformationMatrix>& prior_at_tL);

/// Policies run in table order (myopic, max_trace, max_min) whatever the
/// order of `objectives`; earlier feasible allocations warm-start later
/// solvers.
RunReport run_pipeline(const Scenario& scenario, const std::vector<Objective>& objectives);

struct EmitOptions {
  /// Write measured solver times into the allocation files. Off by default
  /// so repeated runs produce identical bytes; times always go to
  /// timings.json.
  bool inline_timings = false;
};

/// report.json, comparison.csv, allocation_<policy>.json, weights.csv,
/// analysis_o<i>_t<j>.csv (1-based ids) and timings.json.
void emit_reports(const RunReport& report, const std::filesystem::path& out_dir, const EmitOptions& options = {});

std::string comparison_csv(const RunReport& report);
std::string weights_csv(const RunReport& report);
std::string allocation_json(const SolveReport& solve, bool inline_timings = false);
std::string report_json(const RunReport& report);

/// Reads an allocation file back; shape comes from the caller.
Allocation parse_allocation(std::string_view json_text, int observers, int targets, int steps);

}  // namespace cislunar
