#include "cislunar/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cislunar/errors.hpp"
#include "cislunar/filters.hpp"
#include "cislunar/parallel.hpp"

namespace cislunar {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(std::string("cannot open ") + what + " " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

double number_at(const json& obj, const char* key, const std::string& where) {
  const auto& value = obj.at(key);
  if (!value.is_number()) throw ValidationError(where + "." + key + ": expected a number");
  return value.get<double>();
}

std::optional<double> optional_number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  return number_at(obj, key, where);
}

int integer_at(const json& obj, const char* key, const std::string& where) {
  const auto& value = obj.at(key);
  if (!value.is_number_integer()) throw ValidationError(where + "." + key + ": expected an integer");
  return value.get<int>();
}

const json& object_at(const json& obj, const char* key, const std::string& where) {
  const auto& value = obj.at(key);
  if (!value.is_object()) throw ValidationError(where + "." + key + ": expected an object");
  return value;
}

// Either a per-target array or one object applied to every target.
InformationMatrix information_from_json(const json& spec, const std::string& where) {
  if (!spec.is_object()) throw ValidationError(where + ": expected an object");
  InformationMatrix info = InformationMatrix::Zero();
  if (spec.contains("diagonal")) {
    const auto& d = spec.at("diagonal");
    if (!d.is_array() || d.size() != 6) throw ValidationError(where + ".diagonal: expected 6 numbers");
    for (int i = 0; i < 6; ++i) {
      const auto& v = d.at(static_cast<std::size_t>(i));
      if (!v.is_number() || !(v.get<double>() >= 0.0)) {
        throw ValidationError(where + ".diagonal[" + std::to_string(i) + "]: expected a non-negative number");
      }
      info(i, i) = v.get<double>();
    }
  } else if (spec.contains("matrix")) {
    const auto& m = spec.at("matrix");
    if (!m.is_array() || m.size() != 36) throw ValidationError(where + ".matrix: expected 36 numbers (row-major)");
    for (int i = 0; i < 36; ++i) {
      const auto& v = m.at(static_cast<std::size_t>(i));
      if (!v.is_number()) throw ValidationError(where + ".matrix[" + std::to_string(i) + "]: expected a number");
      info(i / 6, i % 6) = v.get<double>();
    }
    if (!info.isApprox(info.transpose(), 1e-12)) throw ValidationError(where + ".matrix: must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix6> eig(symmetrized(info));
    if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
      throw ValidationError(where + ".matrix: must be positive semidefinite");
    }
    info = symmetrized(info);
  } else {
    throw ValidationError(where + ": expected 'diagonal' or 'matrix'");
  }
  return info;
}

std::vector<Objective> objectives_from_json(const json& value, const std::string& where) {
  const auto one = [&](const json& v, const std::string& at) {
    if (!v.is_string()) throw ValidationError(at + ": expected a string");
    try {
      return objective_from_string(v.get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(at + ": " + e.what());
    }
  };
  if (value.is_string() && value.get<std::string>() == "all") {
    return {Objective::Myopic, Objective::MaxTrace, Objective::MaxMin};
  }
  if (value.is_array()) {
    std::vector<Objective> out;
    for (std::size_t i = 0; i < value.size(); ++i) out.push_back(one(value[i], where + "[" + std::to_string(i) + "]"));
    return out;
  }
  return {one(value, where)};
}

std::vector<OrbitInstance> instances_from_json(const json& doc, const char* key,
                                               const std::vector<PeriodicOrbit>& catalog) {
  const std::string where = key;
  if (!doc.contains(key)) throw ValidationError(where + ": missing field");
  const auto& list = doc.at(key);
  if (!list.is_array() || list.empty()) throw ValidationError(where + ": expected a non-empty array");
  std::vector<OrbitInstance> out;
  for (std::size_t n = 0; n < list.size(); ++n) {
    const std::string at = where + "[" + std::to_string(n) + "]";
    const auto& entry = list[n];
    if (!entry.is_object()) throw ValidationError(at + ": expected an object");
    if (!entry.contains("orbit")) throw ValidationError(at + ".orbit: missing field");
    OrbitInstance instance;
    const auto& orbit = entry.at("orbit");
    if (orbit.is_string()) {
      if (catalog.empty()) throw ValidationError(at + ".orbit: named orbit needs a 'catalog' file");
      try {
        instance.orbit = find_orbit(catalog, orbit.get<std::string>());
      } catch (const ValidationError& e) {
        throw ValidationError(at + ".orbit: " + e.what());
      }
    } else {
      try {
        instance.orbit = parse_catalog(json::array({orbit}).dump()).front();
      } catch (const ValidationError& e) {
        throw ValidationError(at + ".orbit: " + e.what());
      }
    }
    instance.phase = entry.contains("phase") ? number_at(entry, "phase", at) : 0.0;
    if (!(instance.phase >= 0.0 && instance.phase < 1.0)) throw ValidationError(at + ".phase: must lie in [0, 1)");
    out.push_back(std::move(instance));
  }
  return out;
}

std::string objective_field(const std::vector<Objective>& objectives) {
  std::vector<Objective> sorted = objectives;
  std::sort(sorted.begin(), sorted.end());
  if (sorted == std::vector<Objective>{Objective::MaxTrace, Objective::MaxMin, Objective::Myopic}) return "all";
  return std::string(to_string(objectives.front()));
}

ordered_json matrix_json(const Matrix6& m) {
  ordered_json rows = ordered_json::array();
  for (int i = 0; i < 6; ++i) {
    ordered_json row = ordered_json::array();
    for (int j = 0; j < 6; ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

std::string format_number(double value) {
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return out.str();
}

}  // namespace

Schedule Scenario::schedule() const { return Schedule::make(t0, steps, delta_t, eps_t); }

NoiseModel Scenario::noise() const { return noise_covariance(sigma, delta_t); }

void Scenario::validate() const {
  params.validate();
  if (observers.empty()) throw ValidationError("observers: need at least one observer");
  if (targets.empty()) throw ValidationError("targets: need at least one target");
  for (std::size_t n = 0; n < observers.size(); ++n) {
    try {
      observers[n].validate();
    } catch (const ValidationError& e) {
      throw ValidationError("observers[" + std::to_string(n) + "]: " + e.what());
    }
  }
  for (std::size_t n = 0; n < targets.size(); ++n) {
    try {
      targets[n].validate();
    } catch (const ValidationError& e) {
      throw ValidationError("targets[" + std::to_string(n) + "]: " + e.what());
    }
  }
  if (steps < 1) throw ValidationError("schedule.steps: must be at least 1");
  if (!(delta_t > 0.0) || !std::isfinite(delta_t)) throw ValidationError("schedule.delta_t: must be positive");
  if (!(eps_t >= 0.0) || !std::isfinite(eps_t)) throw ValidationError("schedule.eps_t: must be non-negative");
  if (!std::isfinite(t0)) throw ValidationError("schedule.t0: must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("noise.sigma: must be positive");
  if (initial_information.size() != targets.size()) {
    throw ValidationError("initial_information: need one matrix per target");
  }
  if (objectives.empty()) throw ValidationError("objective: at least one objective required");
  if (constraints.min_observations < 0) throw ValidationError("min_observations: must be non-negative");
  if (node_limit < 1) throw ValidationError("solver.node_limit: must be positive");
  if (analysis_grid < 0 || analysis_grid == 1) throw ValidationError("analysis_grid: must be 0 or at least 2");

  const bool constrained = std::any_of(objectives.begin(), objectives.end(),
                                       [](Objective o) { return o != Objective::Myopic; });
  const long long cells = static_cast<long long>(observers.size()) * steps;
  const long long needed = static_cast<long long>(constraints.min_observations) * static_cast<long long>(targets.size());
  if (constrained && cells < needed) {
    std::ostringstream msg;
    msg << "coverage infeasible: M*L = " << cells << " < " << constraints.min_observations
        << "*N = " << needed << " (schedule.steps too small)";
    throw InfeasibleError(msg.str());
  }
}

Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("scenario: expected a JSON object");

  Scenario s;
  try {
    if (doc.contains("params")) {
      const auto& p = object_at(doc, "params", "scenario");
      if (auto v = optional_number(p, "mu", "params")) s.params.mu = *v;
      if (auto v = optional_number(p, "lu", "params")) s.params.lu = *v;
      if (auto v = optional_number(p, "tu", "params")) s.params.tu = *v;
    }
    s.params.validate();

    std::vector<PeriodicOrbit> catalog;
    if (doc.contains("catalog")) {
      if (!doc.at("catalog").is_string()) throw ValidationError("catalog: expected a file path");
      s.catalog_path = doc.at("catalog").get<std::string>();
      std::filesystem::path path(*s.catalog_path);
      if (path.is_relative()) path = base_dir / path;
      catalog = load_catalog(path);
    }
    s.observers = instances_from_json(doc, "observers", catalog);
    s.targets = instances_from_json(doc, "targets", catalog);

    const json schedule = doc.contains("schedule") ? object_at(doc, "schedule", "scenario") : json::object();
    if (schedule.contains("t0")) s.t0 = number_at(schedule, "t0", "schedule");
    if (schedule.contains("steps")) s.steps = integer_at(schedule, "steps", "schedule");
    const auto seconds_or_tu = [&](const char* tu_key, const char* s_key, double default_seconds) {
      const bool has_tu = schedule.contains(tu_key);
      const bool has_s = schedule.contains(s_key);
      if (has_tu && has_s) {
        throw ValidationError(std::string("schedule: give either ") + tu_key + " or " + s_key + ", not both");
      }
      if (has_tu) return number_at(schedule, tu_key, "schedule");
      return s.params.seconds_to_tu(has_s ? number_at(schedule, s_key, "schedule") : default_seconds);
    };
    s.delta_t = seconds_or_tu("delta_t", "delta_t_s", kDefaultExposureSeconds);
    s.eps_t = seconds_or_tu("eps_t", "eps_t_s", kDefaultSlewSeconds);

    if (!doc.contains("noise")) throw ValidationError("noise.sigma: missing field");
    const auto& noise = object_at(doc, "noise", "scenario");
    if (!noise.contains("sigma")) throw ValidationError("noise.sigma: missing field");
    s.sigma = number_at(noise, "sigma", "noise");

    s.initial_information.assign(s.targets.size(), InformationMatrix::Zero());
    if (doc.contains("initial_information") && !doc.at("initial_information").is_null()) {
      const auto& prior = doc.at("initial_information");
      if (prior.is_array()) {
        if (prior.size() != s.targets.size()) {
          throw ValidationError("initial_information: expected one entry per target");
        }
        for (std::size_t j = 0; j < prior.size(); ++j) {
          s.initial_information[j] = information_from_json(prior[j], "initial_information[" + std::to_string(j) + "]");
        }
      } else {
        const InformationMatrix shared = information_from_json(prior, "initial_information");
        std::fill(s.initial_information.begin(), s.initial_information.end(), shared);
      }
    }

    s.objectives = doc.contains("objective") ? objectives_from_json(doc.at("objective"), "objective")
                                             : std::vector<Objective>{Objective::Myopic, Objective::MaxTrace,
                                                                      Objective::MaxMin};
    if (doc.contains("min_observations")) {
      s.constraints.min_observations = integer_at(doc, "min_observations", "scenario");
    }
    if (doc.contains("seed")) {
      if (!doc.at("seed").is_number_unsigned()) throw ValidationError("seed: expected a non-negative integer");
      s.seed = doc.at("seed").get<std::uint64_t>();
    }
    if (doc.contains("analysis_grid")) s.analysis_grid = integer_at(doc, "analysis_grid", "scenario");
    if (doc.contains("solver")) {
      const auto& solver = object_at(doc, "solver", "scenario");
      if (solver.contains("node_limit")) {
        if (!solver.at("node_limit").is_number_integer()) {
          throw ValidationError("solver.node_limit: expected an integer");
        }
        s.node_limit = solver.at("node_limit").get<long long>();
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path, "scenario file"), path.parent_path());
}

std::string serialize_scenario(const Scenario& s) {
  ordered_json doc;
  doc["params"] = {{"mu", s.params.mu}, {"lu", s.params.lu}, {"tu", s.params.tu}};
  if (s.catalog_path) doc["catalog"] = *s.catalog_path;
  const auto instances = [&](const std::vector<OrbitInstance>& list) {
    ordered_json out = ordered_json::array();
    for (const auto& instance : list) {
      ordered_json entry;
      if (s.catalog_path) {
        entry["orbit"] = instance.orbit.name;
      } else {
        entry["orbit"] = ordered_json::parse(serialize_catalog({instance.orbit})).at(0);
      }
      entry["phase"] = instance.phase;
      out.push_back(entry);
    }
    return out;
  };
  doc["observers"] = instances(s.observers);
  doc["targets"] = instances(s.targets);
  doc["schedule"] = {{"t0", s.t0}, {"steps", s.steps}, {"delta_t", s.delta_t}, {"eps_t", s.eps_t}};
  doc["noise"] = {{"sigma", s.sigma}};
  const bool all_zero = std::all_of(s.initial_information.begin(), s.initial_information.end(),
                                    [](const InformationMatrix& m) { return m.isZero(0.0); });
  if (!all_zero) {
    ordered_json prior = ordered_json::array();
    for (const auto& m : s.initial_information) {
      ordered_json flat = ordered_json::array();
      for (int i = 0; i < 36; ++i) flat.push_back(m(i / 6, i % 6));
      prior.push_back({{"matrix", flat}});
    }
    doc["initial_information"] = prior;
  }
  doc["objective"] = objective_field(s.objectives);
  doc["min_observations"] = s.constraints.min_observations;
  doc["seed"] = s.seed;
  doc["analysis_grid"] = s.analysis_grid;
  doc["solver"] = {{"node_limit", s.node_limit}};
  return doc.dump(2) + "\n";
}

Scenario reference_scenario(const std::vector<PeriodicOrbit>& catalog, const std::string& catalog_path) {
  struct Slot {
    const char* orbit;
    double phase;
  };
  constexpr Slot kObservers[] = {{"L2S_2.66", 0.0}, {"L1N_1.90", 0.0}, {"DRO_3.33", 0.0}};
  constexpr Slot kTargets[] = {{"L2S_3.33", 3.38e-2}, {"L2S_1.48", 6.45e-2}, {"L2N_2.22", 4.03e-1},
                               {"L1N_2.22", 8.91e-1}, {"L1S_2.00", 5.11e-1}, {"DRO_2.22", 9.57e-1},
                               {"DF_5.55", 1.92e-1}};
  Scenario s;
  s.catalog_path = catalog_path;
  for (const auto& slot : kObservers) s.observers.push_back({find_orbit(catalog, slot.orbit), slot.phase});
  for (const auto& slot : kTargets) s.targets.push_back({find_orbit(catalog, slot.orbit), slot.phase});
  s.delta_t = s.params.seconds_to_tu(kDefaultExposureSeconds);
  s.eps_t = s.params.seconds_to_tu(kDefaultSlewSeconds);
  s.sigma = kDefaultSigma;
  s.initial_information.assign(s.targets.size(), InformationMatrix::Zero());
  s.objectives = {Objective::Myopic, Objective::MaxTrace, Objective::MaxMin};
  s.validate();
  return s;
}

std::vector<Trajectory> make_trajectories(const std::vector<OrbitInstance>& instances, const Cr3bpParams& params,
                                          const Schedule& schedule) {
  const std::vector<double> epochs = schedule.trajectory_epochs();
  std::vector<std::optional<Trajectory>> built(instances.size());
  parallel_for(instances.size(), [&](std::size_t n) {
    built[n].emplace(state_at_phase(instances[n], params), epochs, params);
  });
  std::vector<Trajectory> out;
  out.reserve(built.size());
  for (auto& t : built) out.push_back(std::move(*t));
  return out;
}

TableMetrics table_metrics(const std::vector<InformationMatrix>& final_information) {
  if (final_information.empty()) throw ValidationError("no targets to summarize");
  TableMetrics m;
  m.min_trace = std::numeric_limits<double>::infinity();
  m.min_sigma_max = std::numeric_limits<double>::infinity();
  for (const auto& info : final_information) {
    const double trace = info.trace();
    const double sigma = Eigen::JacobiSVD<Matrix6>(info).singularValues()(0);
    m.sum_trace += trace;
    m.min_trace = std::min(m.min_trace, trace);
    m.max_sigma_max = std::max(m.max_sigma_max, sigma);
    m.min_sigma_max = std::min(m.min_sigma_max, sigma);
  }
  return m;
}

std::vector<InformationMatrix> final_information(const WeightModel& weights, const Allocation& allocation,
                                                 const std::vector<InformationMatrix>& prior_at_tL) {
  const auto& info = weights.projected_info;
  std::vector<InformationMatrix> out = prior_at_tL;
  if (out.size() != static_cast<std::size_t>(info.targets())) throw ValidationError("one prior per target");
  for (int i = 0; i < info.observers(); ++i) {
    for (int j = 0; j < info.targets(); ++j) {
      for (int k = 0; k < info.steps(); ++k) {
        if (allocation(i, j, k) != 0) out[static_cast<std::size_t>(j)] += info(i, j, k);
      }
    }
  }
  for (auto& m : out) m = symmetrized(m);
  return out;
}

RunReport run_pipeline(const Scenario& scenario, const std::vector<Objective>& objectives) {
  Scenario checked = scenario;
  checked.objectives = objectives;
  checked.validate();

  RunReport report;
  report.seed = scenario.seed;
  report.schedule = scenario.schedule();
  const NoiseModel noise = scenario.noise();
  const auto observers = make_trajectories(scenario.observers, scenario.params, report.schedule);
  const auto targets = make_trajectories(scenario.targets, scenario.params, report.schedule);

  const bool constrained = std::any_of(objectives.begin(), objectives.end(),
                                       [](Objective o) { return o != Objective::Myopic; });
  TaskingConstraints weight_constraints = scenario.constraints;
  if (!constrained) weight_constraints.min_observations = 0;
  report.weights = build_weight_model(observers, targets, noise, report.schedule, weight_constraints);

  const auto N = scenario.targets.size();
  report.prior_at_tL.assign(N, InformationMatrix::Zero());
  std::vector<double> offsets(N, 0.0);
  parallel_for(N, [&](std::size_t j) {
    const InformationMatrix& prior = scenario.initial_information[j];
    if (prior.isZero(0.0)) return;
    const Matrix6 phi = targets[j].stm(report.schedule.t.front(), report.schedule.t_L).phi;
    report.prior_at_tL[j] = eif_predict_noiseless(prior, phi);
    offsets[j] = report.prior_at_tL[j].trace();
  });

  const auto wants = [&](Objective o) { return std::find(objectives.begin(), objectives.end(), o) != objectives.end(); };
  SolverOptions options;
  options.node_limit = scenario.node_limit;
  const auto record = [&](SolveReport solve) {
    PolicyResult result;
    result.final_information = final_information(report.weights, solve.allocation, report.prior_at_tL);
    result.metrics = table_metrics(result.final_information);
    result.solve = std::move(solve);
    report.policies.push_back(std::move(result));
    const auto& latest = report.policies.back().solve;
    if (latest.coverage_feasible) options.warm_starts.push_back(latest.allocation);
  };
  if (wants(Objective::Myopic)) record(myopic_policy(report.weights.instantaneous, scenario.constraints));
  if (wants(Objective::MaxTrace)) record(solve_max_trace(report.weights.projected, scenario.constraints, options));
  if (wants(Objective::MaxMin)) {
    options.target_offsets = offsets;
    record(solve_max_min(report.weights.projected, scenario.constraints, options));
  }

  if (scenario.analysis_grid >= 2) {
    std::vector<double> grid(static_cast<std::size_t>(scenario.analysis_grid));
    const double t0 = report.schedule.t.front();
    const double span = report.schedule.t_L - t0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      grid[g] = t0 + span * static_cast<double>(g) / static_cast<double>(grid.size() - 1);
    }
    for (std::size_t i = 0; i < observers.size(); ++i) {
      for (std::size_t j = 0; j < targets.size(); ++j) {
        report.analyses.push_back({static_cast<int>(i), static_cast<int>(j),
                                   pair_analysis(observers[i], targets[j], noise, report.schedule.t_L, grid)});
      }
    }
  }
  return report;
}

std::string allocation_json(const SolveReport& solve, bool inline_timings) {
  ordered_json doc;
  doc["policy"] = std::string(to_string(solve.policy));
  doc["weights"] = solve.policy == Objective::Myopic ? "instantaneous" : "projected";
  doc["objective"] = solve.objective;
  doc["optimality"] = std::string(to_string(solve.optimality));
  doc["coverage_feasible"] = solve.coverage_feasible;
  doc["per_target_traces"] = solve.per_target_traces;
  ordered_json triples = ordered_json::array();
  const auto& u = solve.allocation;
  for (int k = 0; k < u.steps(); ++k) {
    for (int i = 0; i < u.observers(); ++i) {
      for (int j = 0; j < u.targets(); ++j) {
        if (u(i, j, k) != 0) triples.push_back({i, j, k});
      }
    }
  }
  doc["allocation"] = triples;
  doc["nodes_explored"] = solve.nodes_explored;
  doc["wall_time_ms"] = inline_timings ? ordered_json(solve.wall_time_ms) : ordered_json(nullptr);
  return doc.dump(2) + "\n";
}

Allocation parse_allocation(std::string_view json_text, int observers, int targets, int steps) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("allocation parse error: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("allocation") || !doc.at("allocation").is_array()) {
    throw ValidationError("allocation: expected an object with an 'allocation' array");
  }
  Allocation u(observers, targets, steps, 0);
  const auto& list = doc.at("allocation");
  for (std::size_t n = 0; n < list.size(); ++n) {
    const auto& t = list[n];
    const std::string at = "allocation[" + std::to_string(n) + "]";
    if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() || !t[1].is_number_integer() ||
        !t[2].is_number_integer()) {
      throw ValidationError(at + ": expected [i, j, k]");
    }
    const int i = t[0].get<int>();
    const int j = t[1].get<int>();
    const int k = t[2].get<int>();
    if (i < 0 || i >= observers || j < 0 || j >= targets || k < 0 || k >= steps) {
      throw ValidationError(at + ": index out of range");
    }
    u(i, j, k) = 1;
  }
  return u;
}

std::string comparison_csv(const RunReport& report) {
  std::ostringstream out;
  out << "policy,sum_trace,min_trace,max_sigma_max,min_sigma_max,coverage_feasible,optimality\n";
  for (const auto& p : report.policies) {
    out << to_string(p.solve.policy) << ',' << format_number(p.metrics.sum_trace) << ','
        << format_number(p.metrics.min_trace) << ',' << format_number(p.metrics.max_sigma_max) << ','
        << format_number(p.metrics.min_sigma_max) << ',' << (p.solve.coverage_feasible ? "true" : "false") << ','
        << to_string(p.solve.optimality) << '\n';
  }
  return out.str();
}

std::string weights_csv(const RunReport& report) {
  const auto& w = report.weights;
  std::ostringstream out;
  out << "observer,target,step,t_measure,weight_projected,weight_instantaneous\n";
  for (int i = 0; i < w.projected.observers(); ++i) {
    for (int j = 0; j < w.projected.targets(); ++j) {
      for (int k = 0; k < w.projected.steps(); ++k) {
        out << i << ',' << j << ',' << k << ',' << format_number(report.schedule.t_prime[static_cast<std::size_t>(k)])
            << ',' << format_number(w.projected(i, j, k)) << ',' << format_number(w.instantaneous(i, j, k)) << '\n';
      }
    }
  }
  return out.str();
}

std::string report_json(const RunReport& report) {
  ordered_json doc;
  const auto& s = report.schedule;
  doc["schedule"] = {{"t0", s.t.front()}, {"steps", s.steps()}, {"delta_t", s.delta_t}, {"eps_t", s.eps_t},
                     {"t_L", s.t_L}};
  doc["seed"] = report.seed;
  ordered_json policies = ordered_json::array();
  for (const auto& p : report.policies) {
    ordered_json entry;
    entry["policy"] = std::string(to_string(p.solve.policy));
    entry["objective"] = p.solve.objective;
    entry["optimality"] = std::string(to_string(p.solve.optimality));
    entry["coverage_feasible"] = p.solve.coverage_feasible;
    entry["nodes_explored"] = p.solve.nodes_explored;
    entry["metrics"] = {{"sum_trace", p.metrics.sum_trace},
                        {"min_trace", p.metrics.min_trace},
                        {"max_sigma_max", p.metrics.max_sigma_max},
                        {"min_sigma_max", p.metrics.min_sigma_max}};
    ordered_json finals = ordered_json::array();
    for (const auto& m : p.final_information) finals.push_back(matrix_json(m));
    entry["final_information"] = finals;
    policies.push_back(entry);
  }
  doc["policies"] = policies;
  return doc.dump(2) + "\n";
}

void emit_reports(const RunReport& report, const std::filesystem::path& out_dir, const EmitOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  write_file(out_dir / "report.json", report_json(report));
  write_file(out_dir / "comparison.csv", comparison_csv(report));
  write_file(out_dir / "weights.csv", weights_csv(report));
  ordered_json timings;
  for (const auto& p : report.policies) {
    const std::string name(to_string(p.solve.policy));
    write_file(out_dir / ("allocation_" + name + ".json"), allocation_json(p.solve, options.inline_timings));
    timings[name] = {{"wall_time_ms", p.solve.wall_time_ms}};
  }
  for (const auto& a : report.analyses) {
    const std::string name = "analysis_o" + std::to_string(a.observer + 1) + "_t" + std::to_string(a.target + 1) + ".csv";
    write_file(out_dir / name, analysis_csv(a.rows));
  }
  write_file(out_dir / "timings.json", timings.dump(2) + "\n");
}

}  // namespace cislunar
