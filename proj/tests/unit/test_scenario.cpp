#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cislunar/errors.hpp"
#include "cislunar/scenario.hpp"
#include "generators.hpp"

using namespace cislunar;
using cislunar::testing::data_path;
using cislunar::testing::Gen;
using cislunar::testing::rel_err;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json bundled() { return nlohmann::json::parse(slurp(data_path("tables23.json"))); }

Scenario parse(const nlohmann::json& doc) { return parse_scenario(doc.dump(), data_path("")); }

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cislunar_" + name);
  fs::remove_all(dir);
  return dir;
}

// A short run keeps the exact solvers in their proven regime.
Scenario small_scenario() {
  auto doc = bundled();
  doc["schedule"]["steps"] = 6;
  doc["analysis_grid"] = 5;
  return parse(doc);
}

}  // namespace

TEST(Load, BundledScenarioShape) {
  const Scenario s = load_scenario(data_path("tables23.json"));
  EXPECT_EQ(s.observers.size(), 3u);
  EXPECT_EQ(s.targets.size(), 7u);
  EXPECT_EQ(s.steps, kDefaultSteps);
  EXPECT_DOUBLE_EQ(s.sigma, kDefaultSigma);
  EXPECT_DOUBLE_EQ(s.delta_t, s.params.seconds_to_tu(100));
  EXPECT_DOUBLE_EQ(s.eps_t, s.params.seconds_to_tu(900));
  EXPECT_EQ(s.targets[6].orbit.family, OrbitFamily::Dragonfly);
  EXPECT_DOUBLE_EQ(s.targets[0].phase, 3.38e-2);
  for (const auto& m : s.initial_information) EXPECT_TRUE(m.isZero(0.0));
}

TEST(Load, MissingSigmaNamesTheField) {
  auto doc = bundled();
  doc["noise"].erase("sigma");
  try {
    parse(doc);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("noise.sigma"), std::string::npos) << e.what();
  }
  doc.erase("noise");
  EXPECT_THROW(parse(doc), ValidationError);
}

TEST(Load, ShortHorizonIsInfeasibleForCoverageObjectives) {
  auto doc = bundled();
  doc["schedule"]["steps"] = 4;  // 3 * 4 < 2 * 7
  doc["objective"] = "max_trace";
  EXPECT_THROW(parse(doc), InfeasibleError);
  doc["objective"] = "myopic";
  EXPECT_NO_THROW(parse(doc));
}

TEST(Load, FieldErrors) {
  auto doc = bundled();
  doc["schedule"]["steps"] = 0;
  EXPECT_THROW(parse(doc), ValidationError);
  doc = bundled();
  doc["targets"][2]["phase"] = 1.0;
  try {
    parse(doc);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("targets[2].phase"), std::string::npos) << e.what();
  }
  doc = bundled();
  doc["observers"][0]["orbit"] = "NOPE";
  EXPECT_THROW(parse(doc), ValidationError);
  doc = bundled();
  doc["objective"] = "greedy";
  EXPECT_THROW(parse(doc), ValidationError);
  EXPECT_THROW(parse_scenario("not json"), ValidationError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ValidationError);
}

TEST(Load, SecondsAndCanonicalScheduleUnits) {
  auto doc = bundled();
  doc["schedule"].erase("delta_t");
  doc["schedule"]["delta_t_s"] = 200.0;
  const Scenario s = parse(doc);
  EXPECT_DOUBLE_EQ(s.delta_t, s.params.seconds_to_tu(200.0));
  doc["schedule"]["delta_t"] = 0.001;
  EXPECT_THROW(parse(doc), ValidationError);
}

TEST(Load, DiagonalPrior) {
  auto doc = bundled();
  doc["initial_information"] = {{"diagonal", {1, 2, 3, 4, 5, 6}}};
  const Scenario s = parse(doc);
  for (const auto& m : s.initial_information) EXPECT_EQ(m.diagonal()(5), 6.0);
  doc["initial_information"] = {{"diagonal", {1, 2, 3}}};
  EXPECT_THROW(parse(doc), ValidationError);
}

TEST(Serialize, RoundTrip) {
  auto doc = bundled();
  doc["initial_information"] = {{"diagonal", {1, 2, 3, 4, 5, 6}}};
  const Scenario s = parse(doc);
  const Scenario again = parse_scenario(serialize_scenario(s), data_path(""));
  EXPECT_EQ(serialize_scenario(again), serialize_scenario(s));
  EXPECT_EQ(again.targets[3].orbit.x0.stacked(), s.targets[3].orbit.x0.stacked());
  EXPECT_EQ(again.initial_information[2], s.initial_information[2]);

  Scenario inline_orbits = s;
  inline_orbits.catalog_path.reset();
  const Scenario from_inline = parse_scenario(serialize_scenario(inline_orbits));
  EXPECT_EQ(from_inline.observers[1].orbit.x0.stacked(), s.observers[1].orbit.x0.stacked());
}

TEST(Metrics, TableColumns) {
  InformationMatrix a = InformationMatrix::Zero(), b = InformationMatrix::Zero();
  a.diagonal() << 4, 1, 0, 0, 0, 0;
  b.diagonal() << 1, 1, 1, 0, 0, 0;
  const auto m = table_metrics({a, b});
  EXPECT_DOUBLE_EQ(m.sum_trace, 8.0);
  EXPECT_DOUBLE_EQ(m.min_trace, 3.0);
  EXPECT_DOUBLE_EQ(m.max_sigma_max, 4.0);
  EXPECT_DOUBLE_EQ(m.min_sigma_max, 1.0);
}

TEST(Pipeline, ReportsAreRecomputableFromAllocationFiles) {
  const Scenario s = small_scenario();
  const RunReport report = run_pipeline(s, s.objectives);
  ASSERT_EQ(report.policies.size(), 3u);
  const fs::path dir = fresh_dir("pipeline");
  emit_reports(report, dir);

  const std::string comparison = slurp(dir / "comparison.csv");
  EXPECT_EQ(std::count(comparison.begin(), comparison.end(), '\n'), 4);
  EXPECT_EQ(comparison.substr(0, comparison.find('\n')),
            "policy,sum_trace,min_trace,max_sigma_max,min_sigma_max,coverage_feasible,optimality");

  const auto& w = report.weights.projected;
  for (const auto& p : report.policies) {
    const std::string name(to_string(p.solve.policy));
    const Allocation u = parse_allocation(slurp(dir / ("allocation_" + name + ".json")), w.observers(), w.targets(),
                                          w.steps());
    EXPECT_EQ(u, p.solve.allocation);
    const bool myopic = p.solve.policy == Objective::Myopic;
    const auto check = validate_allocation(u, myopic ? report.weights.instantaneous : w);
    for (std::size_t j = 0; j < check.per_target_traces.size(); ++j) {
      EXPECT_LT(rel_err(check.per_target_traces[j], p.solve.per_target_traces[j]), 1e-12);
    }
    const auto metrics = table_metrics(final_information(report.weights, u, report.prior_at_tL));
    EXPECT_LT(rel_err(metrics.sum_trace, p.metrics.sum_trace), 1e-9);
    EXPECT_LT(rel_err(metrics.min_trace, p.metrics.min_trace), 1e-9);
    EXPECT_LT(rel_err(metrics.max_sigma_max, p.metrics.max_sigma_max), 1e-9);
    EXPECT_LT(rel_err(metrics.min_sigma_max, p.metrics.min_sigma_max), 1e-9);
    if (!myopic) {
      EXPECT_TRUE(check.coverage_ok);
      // Max-min on this near-symmetric instance exhausts the node budget
      // and reports its incumbent as heuristic.
      if (p.solve.policy == Objective::MaxTrace) EXPECT_EQ(p.solve.optimality, Optimality::Proven);
    }
  }
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 7; ++j) {
      const fs::path csv = dir / ("analysis_o" + std::to_string(i) + "_t" + std::to_string(j) + ".csv");
      ASSERT_TRUE(fs::exists(csv)) << csv;
      EXPECT_EQ(slurp(csv).substr(0, 7), "t,sigma");
    }
  const std::string weights = slurp(dir / "weights.csv");
  EXPECT_EQ(std::count(weights.begin(), weights.end(), '\n'), 1 + 3 * 7 * 6);
  fs::remove_all(dir);
}

TEST(Pipeline, DominanceOrdering) {
  const Scenario s = small_scenario();
  const RunReport report = run_pipeline(s, s.objectives);
  const auto& myopic = report.policies[0];
  const auto& trace = report.policies[1];
  const auto& maxmin = report.policies[2];
  EXPECT_GE(trace.metrics.sum_trace * (1 + 1e-9), maxmin.metrics.sum_trace);
  EXPECT_GE(maxmin.metrics.min_trace * (1 + 1e-9), trace.metrics.min_trace);
  EXPECT_GE(maxmin.metrics.min_trace * (1 + 1e-9), myopic.metrics.min_trace);
  if (myopic.solve.coverage_feasible) EXPECT_GE(trace.metrics.sum_trace * (1 + 1e-9), myopic.metrics.sum_trace);
}

TEST(Pipeline, PriorInformationEntersFinalMatrices) {
  auto doc = bundled();
  doc["schedule"]["steps"] = 5;
  doc["analysis_grid"] = 0;
  doc["objective"] = "max_min";
  doc["initial_information"] = {{"diagonal", {1e6, 1e6, 1e6, 1e8, 1e8, 1e8}}};
  const Scenario s = parse(doc);
  const RunReport report = run_pipeline(s, s.objectives);
  ASSERT_EQ(report.policies.size(), 1u);
  const auto& p = report.policies.front();
  for (std::size_t j = 0; j < 7; ++j) {
    EXPECT_GT(report.prior_at_tL[j].trace(), 0.0);
    EXPECT_LT(rel_err(p.final_information[j].trace(), report.prior_at_tL[j].trace() + p.solve.per_target_traces[j]),
              1e-9);
  }
  EXPECT_TRUE(report.analyses.empty());
}

TEST(Pipeline, RandomFeasibleScenariosKeepDominance) {
  Gen gen(31);
  const auto catalog = load_catalog(data_path("catalog.json"));
  for (int trial = 0; trial < 4; ++trial) {
    Scenario s;
    const int M = gen.integer(1, 2), N = gen.integer(2, 3);
    for (int i = 0; i < M; ++i) s.observers.push_back({catalog[static_cast<std::size_t>(gen.integer(0, 2))], gen.uniform(0, 0.99)});
    for (int j = 0; j < N; ++j) s.targets.push_back({catalog[static_cast<std::size_t>(gen.integer(3, 9))], gen.uniform(0, 0.99)});
    s.steps = gen.integer(3, 5);
    if (M * s.steps < 2 * N) s.steps = (2 * N + M - 1) / M;
    s.delta_t = s.params.seconds_to_tu(100);
    s.eps_t = s.params.seconds_to_tu(900);
    s.sigma = kDefaultSigma;
    s.initial_information.assign(static_cast<std::size_t>(N), InformationMatrix::Zero());
    s.objectives = {Objective::Myopic, Objective::MaxTrace, Objective::MaxMin};
    s.analysis_grid = 0;
    const auto report = run_pipeline(s, s.objectives);
    const auto& myopic = report.policies[0].metrics;
    const auto& trace = report.policies[1].metrics;
    const auto& maxmin = report.policies[2].metrics;
    EXPECT_GE(trace.sum_trace * (1 + 1e-9), maxmin.sum_trace);
    EXPECT_GE(maxmin.min_trace * (1 + 1e-9), trace.min_trace);
    EXPECT_GE(maxmin.min_trace * (1 + 1e-9), myopic.min_trace);
    if (report.policies[0].solve.coverage_feasible) EXPECT_GE(trace.sum_trace * (1 + 1e-9), myopic.sum_trace);
  }
}

TEST(Pipeline, ByteIdenticalReruns) {
  const Scenario s = small_scenario();
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  emit_reports(run_pipeline(s, s.objectives), a);
  emit_reports(run_pipeline(s, s.objectives), b);
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    if (name == "timings.json") continue;
    EXPECT_EQ(slurp(entry.path()), slurp(b / name)) << name;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Allocations, ParseErrors) {
  EXPECT_THROW(parse_allocation("{}", 1, 1, 1), ValidationError);
  EXPECT_THROW(parse_allocation(R"({"allocation": [[0, 0, 5]]})", 1, 1, 1), ValidationError);
  EXPECT_THROW(parse_allocation(R"({"allocation": [[0, 0]]})", 1, 1, 1), ValidationError);
}
