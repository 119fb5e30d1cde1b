#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cislunar/errors.hpp"
#include "cislunar/info_analysis.hpp"
#include "cislunar/orbit_catalog.hpp"
#include "cislunar/scenario.hpp"
#include "cislunar/tasking.hpp"

namespace fs = std::filesystem;
using namespace cislunar;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitInfeasible = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<Objective> parse_objectives(const std::string& name) {
  if (name == "all") return {Objective::Myopic, Objective::MaxTrace, Objective::MaxMin};
  return {objective_from_string(name)};
}

struct SolveArgs {
  std::string scenario;
  std::string objective = "all";
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> grid;
  bool inline_timings = false;
};

int run_solve(const SolveArgs& args) {
  Scenario scenario = load_scenario(args.scenario);
  if (args.seed) scenario.seed = *args.seed;
  if (args.grid) scenario.analysis_grid = *args.grid;
  scenario.objectives = parse_objectives(args.objective);
  scenario.validate();

  const RunReport report = run_pipeline(scenario, scenario.objectives);
  emit_reports(report, args.out, {.inline_timings = args.inline_timings});
  std::cout << comparison_csv(report);
  for (const auto& p : report.policies) {
    if (p.solve.policy != Objective::Myopic && p.solve.optimality == Optimality::Heuristic) {
      std::cerr << "warning: " << to_string(p.solve.policy) << " hit the node limit; result is heuristic\n";
    }
  }
  return kExitOk;
}

struct AnalyzeArgs {
  std::string scenario;
  int observer = 1;
  int target = 1;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int grid = kDefaultAnalysisGrid;
  int samples = 1000;
  double scale = 1e-8;
  std::optional<double> back;
};

int run_analyze(const AnalyzeArgs& args) {
  const Scenario scenario = load_scenario(args.scenario);
  const auto M = static_cast<int>(scenario.observers.size());
  const auto N = static_cast<int>(scenario.targets.size());
  if (args.observer < 1 || args.observer > M) throw ValidationError("--observer: out of range 1.." + std::to_string(M));
  if (args.target < 1 || args.target > N) throw ValidationError("--target: out of range 1.." + std::to_string(N));
  if (args.grid < 2) throw ValidationError("--grid: need at least 2 points");
  if (args.samples < 2) throw ValidationError("--samples: need at least 2");
  if (!(args.scale > 0.0)) throw ValidationError("--scale: must be positive");
  const std::uint64_t seed = args.seed.value_or(scenario.seed);

  const Schedule schedule = scenario.schedule();
  const double t0 = schedule.t.front();
  const double t_L = schedule.t_L;
  const OrbitInstance& observer_orbit = scenario.observers[static_cast<std::size_t>(args.observer - 1)];
  const OrbitInstance& target_orbit = scenario.targets[static_cast<std::size_t>(args.target - 1)];
  const double period = target_orbit.orbit.period;

  const auto uniform_grid = [&](double a, double b) {
    std::vector<double> g(static_cast<std::size_t>(args.grid));
    for (std::size_t n = 0; n < g.size(); ++n) {
      g[n] = a + (b - a) * static_cast<double>(n) / static_cast<double>(g.size() - 1);
    }
    return g;
  };

  // One trajectory per object spanning a full backward target period from
  // t_L as well as the schedule window.
  const double start = std::min(t0, t_L - period);
  std::vector<double> epochs = uniform_grid(start, t_L);
  for (double t : schedule.trajectory_epochs()) epochs.push_back(t);
  std::sort(epochs.begin(), epochs.end());
  epochs.erase(std::unique(epochs.begin(), epochs.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               epochs.end());

  const auto at_start = [&](const OrbitInstance& instance) {
    // Phases are defined at t0; shift to the earlier trajectory start.
    OrbitInstance shifted = instance;
    double phase = instance.phase + (start - t0) / instance.orbit.period;
    phase -= std::floor(phase);
    shifted.phase = phase >= 1.0 ? 0.0 : phase;
    return state_at_phase(shifted, scenario.params);
  };
  const Trajectory observer(at_start(observer_orbit), epochs, scenario.params);
  const Trajectory target(at_start(target_orbit), epochs, scenario.params);

  const auto window = uniform_grid(t0, t_L);
  const auto rows = pair_analysis(observer, target, scenario.noise(), t_L, window);
  const auto backward = uniform_grid(t_L - period, t_L);
  const auto deformation = deformation_timeseries(target, t_L, backward);

  const double t_back = t_L - args.back.value_or(0.5 * period);
  if (t_back < start - 1e-12) throw ValidationError("--back: exceeds one target period");
  const PerturbationCloud cloud = backward_perturbation_samples(target, t_L, t_back, args.samples, args.scale, seed);

  ensure_dir(args.out);
  const std::string pair = "o" + std::to_string(args.observer) + "_t" + std::to_string(args.target);
  write_text(fs::path(args.out) / ("analysis_" + pair + ".csv"), analysis_csv(rows));

  std::ostringstream csv;
  csv << std::setprecision(17) << "t,sigma_max_cgt\n";
  for (const auto& p : deformation) csv << p.t << ',' << p.sigma_max << '\n';
  write_text(fs::path(args.out) / ("deformation_t" + std::to_string(args.target) + ".csv"), csv.str());

  std::size_t interior_peaks = 0;
  for (std::size_t n = 1; n + 1 < deformation.size(); ++n) {
    if (deformation[n].sigma_max > deformation[n - 1].sigma_max &&
        deformation[n].sigma_max > deformation[n + 1].sigma_max) {
      ++interior_peaks;
    }
  }
  ordered_json summary;
  summary["target"] = target_orbit.orbit.name;
  summary["t_ref"] = t_L;
  summary["t_back"] = t_back;
  summary["samples"] = args.samples;
  summary["scale"] = args.scale;
  summary["seed"] = seed;
  summary["sigma_max_cgt"] = cloud.cgt.sigma_max;
  summary["sample_std"] = {cloud.sample_std(0), cloud.sample_std(1)};
  summary["predicted_std"] = {cloud.predicted_std(0), cloud.predicted_std(1)};
  summary["interior_local_maxima"] = interior_peaks;
  write_text(fs::path(args.out) / ("perturbation_t" + std::to_string(args.target) + ".json"), summary.dump(2) + "\n");
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

struct OrbitsArgs {
  std::string out = "data";
  std::string catalog;
  std::string from;
  double period = 0.0;
  std::string name;
};

int run_orbits(const OrbitsArgs& args) {
  ensure_dir(args.out);
  const Cr3bpParams params;
  std::vector<PeriodicOrbit> catalog;
  if (args.catalog.empty()) {
    catalog = reference_catalog(params);
  } else {
    CorrectionOptions fixed_period;
    fixed_period.fixed = FixedParameter::Period;
    for (const auto& orbit : load_catalog(args.catalog)) {
      auto result = differential_correct(orbit.x0, 0.5 * orbit.period, symmetry_of(orbit.family), params, fixed_period);
      result.orbit.name = orbit.name;
      result.orbit.family = orbit.family;
      result.orbit.meta = orbit.meta;
      catalog.push_back(std::move(result.orbit));
    }
  }
  if (!args.from.empty()) {
    if (!(args.period > 0.0)) throw ValidationError("--period: required with --from");
    const PeriodicOrbit& seed = find_orbit(catalog, args.from);
    auto member = continue_to_period(seed, args.period, params).orbit;
    std::ostringstream name;
    name << args.from.substr(0, args.from.find('_')) << '_' << std::fixed << std::setprecision(2) << args.period;
    member.name = args.name.empty() ? name.str() : args.name;
    member.family = seed.family;
    member.meta.source = "continued from " + seed.name;
    catalog.push_back(std::move(member));
  }

  const fs::path catalog_path = fs::path(args.out) / "catalog.json";
  save_catalog(catalog_path, catalog);
  std::cout << "wrote " << catalog_path.string() << " (" << catalog.size() << " orbits)\n";
  if (args.catalog.empty() && args.from.empty()) {
    const fs::path scenario_path = fs::path(args.out) / "tables23.json";
    write_text(scenario_path, serialize_scenario(reference_scenario(catalog, "catalog.json")));
    std::cout << "wrote " << scenario_path.string() << '\n';
  }
  for (const auto& o : catalog) {
    std::cout << std::left << std::setw(10) << o.name << " T=" << std::setprecision(6) << o.period
              << " stability=" << o.stability_index << '\n';
  }
  return kExitOk;
}

struct OracleArgs {
  std::uint64_t seed = 0;
  int observers = 2;
  int targets = 2;
  int steps = 2;
  int trials = 1;
};

int run_oracle(const OracleArgs& args) {
  if (args.observers < 1 || args.targets < 1 || args.steps < 1 || args.trials < 1) {
    throw ValidationError("oracle: sizes and --trials must be positive");
  }
  std::mt19937_64 rng(args.seed);
  std::uniform_real_distribution<double> weight(0.0, 1.0);
  const TaskingConstraints constraints;
  int mismatches = 0;
  int infeasible = 0;
  for (int trial = 0; trial < args.trials; ++trial) {
    WeightTensor w(args.observers, args.targets, args.steps, 0.0);
    for (int i = 0; i < args.observers; ++i) {
      for (int j = 0; j < args.targets; ++j) {
        for (int k = 0; k < args.steps; ++k) w(i, j, k) = weight(rng);
      }
    }
    for (Objective objective : {Objective::MaxTrace, Objective::MaxMin}) {
      SolveReport exact;
      try {
        exact = brute_force_oracle(w, objective, constraints);
      } catch (const InfeasibleError&) {
        ++infeasible;
        break;
      }
      const SolveReport solved =
          objective == Objective::MaxTrace ? solve_max_trace(w, constraints) : solve_max_min(w, constraints);
      const double tol = 1e-9 * std::max(1.0, std::abs(exact.objective));
      const bool match = std::abs(solved.objective - exact.objective) <= tol;
      if (!match) ++mismatches;
      std::cout << "trial " << trial << ' ' << to_string(objective) << " solver=" << std::setprecision(17)
                << solved.objective << " oracle=" << exact.objective << (match ? " ok" : " MISMATCH") << '\n';
    }
  }
  if (infeasible > 0) std::cout << infeasible << " infeasible instance(s) skipped\n";
  if (infeasible == args.trials) {
    throw InfeasibleError("oracle: M*L < 2N, no feasible allocation exists");
  }
  std::cout << (mismatches == 0 ? "oracle agreement" : "oracle MISMATCH") << '\n';
  return mismatches == 0 ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive sensor tasking for cislunar space-domain awareness"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Solve the tasking problem for a scenario and write reports");
  solve_cmd->add_option("--scenario", solve.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--objective", solve.objective, "max-trace | max-min | myopic | all")
      ->check(CLI::IsMember({"max-trace", "max_trace", "max-min", "max_min", "myopic", "all"}));
  solve_cmd->add_option("--out", solve.out, "Output directory");
  solve_cmd->add_option("--seed", solve.seed, "Override the scenario seed");
  solve_cmd->add_option("--grid", solve.grid, "Analysis samples per observer-target pair (0 disables)")
      ->check(CLI::NonNegativeNumber);
  solve_cmd->add_flag("--inline-timings", solve.inline_timings, "Write wall times into allocation files");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Deformation and bound time series for one pair");
  analyze_cmd->add_option("--scenario", analyze.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--observer", analyze.observer, "Observer id (1-based)");
  analyze_cmd->add_option("--target", analyze.target, "Target id (1-based)");
  analyze_cmd->add_option("--out", analyze.out, "Output directory");
  analyze_cmd->add_option("--seed", analyze.seed, "Monte Carlo seed (defaults to the scenario seed)");
  analyze_cmd->add_option("--grid", analyze.grid, "Samples per series");
  analyze_cmd->add_option("--samples", analyze.samples, "Monte Carlo sample count");
  analyze_cmd->add_option("--scale", analyze.scale, "Perturbation standard deviation (nondimensional)");
  analyze_cmd->add_option("--back", analyze.back, "Backward span for the Monte Carlo cloud, TU (default half a period)");

  OrbitsArgs orbits;
  auto* orbits_cmd = app.add_subcommand("orbits", "Generate or re-correct catalog entries");
  orbits_cmd->add_option("--out", orbits.out, "Output directory for catalog.json (and tables23.json)");
  orbits_cmd->add_option("--catalog", orbits.catalog, "Re-correct this catalog instead of the built-in one")
      ->check(CLI::ExistingFile);
  orbits_cmd->add_option("--from", orbits.from, "Continue this catalog orbit along its family");
  orbits_cmd->add_option("--period", orbits.period, "Target period for --from, TU");
  orbits_cmd->add_option("--name", orbits.name, "Name of the continued orbit");

  OracleArgs oracle;
  auto* oracle_cmd = app.add_subcommand("oracle", "Compare the exact solvers with brute force on random weights");
  oracle_cmd->add_option("--seed", oracle.seed, "RNG seed");
  oracle_cmd->add_option("--observers", oracle.observers, "M");
  oracle_cmd->add_option("--targets", oracle.targets, "N");
  oracle_cmd->add_option("--steps", oracle.steps, "L");
  oracle_cmd->add_option("--trials", oracle.trials, "Number of random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (*solve_cmd) return run_solve(solve);
    if (*analyze_cmd) return run_analyze(analyze);
    if (*orbits_cmd) return run_orbits(orbits);
    if (*oracle_cmd) return run_oracle(oracle);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitValidation;
}
