#include "cislunar/tasking.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "cislunar/errors.hpp"
#include "cislunar/filters.hpp"
#include "cislunar/parallel.hpp"

namespace cislunar {

Schedule Schedule::make(double t0, int steps, double delta_t, double eps_t) {
  if (steps < 1) throw ValidationError("schedule.steps must be at least 1");
  if (!(delta_t > 0.0) || !std::isfinite(delta_t)) throw ValidationError("schedule.delta_t must be positive");
  if (!(eps_t >= 0.0) || !std::isfinite(eps_t)) throw ValidationError("schedule.eps_t must be non-negative");
  if (!std::isfinite(t0)) throw ValidationError("schedule.t0 must be finite");
  Schedule s;
  s.delta_t = delta_t;
  s.eps_t = eps_t;
  const double stride = delta_t + eps_t;
  for (int k = 0; k < steps; ++k) {
    s.t.push_back(t0 + k * stride);
    s.t_prime.push_back(s.t.back() + 0.5 * delta_t);
  }
  s.t_L = s.t.back() + stride;
  return s;
}

std::vector<double> Schedule::trajectory_epochs() const {
  std::vector<double> epochs;
  epochs.reserve(t_prime.size() + 2);
  epochs.push_back(t.front());
  epochs.insert(epochs.end(), t_prime.begin(), t_prime.end());
  epochs.push_back(t_L);
  return epochs;
}

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::MaxTrace:
      return "max_trace";
    case Objective::MaxMin:
      return "max_min";
    case Objective::Myopic:
      return "myopic";
  }
  return "max_trace";
}

std::string_view to_string(Optimality optimality) {
  return optimality == Optimality::Proven ? "proven" : "heuristic";
}

Objective objective_from_string(std::string_view name) {
  if (name == "max-trace" || name == "max_trace") return Objective::MaxTrace;
  if (name == "max-min" || name == "max_min") return Objective::MaxMin;
  if (name == "myopic") return Objective::Myopic;
  throw ValidationError("unknown objective '" + std::string(name) + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Relative slack used when comparing objective values.
double slack(double value) { return std::isfinite(value) ? 1e-12 * std::max(1.0, std::abs(value)) : 0.0; }

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cells are (k, i) pairs in step-major order: cell = k * M + i.
struct Problem {
  int M = 0;
  int N = 0;
  int L = 0;
  int cells = 0;
  int min_obs = 2;
  std::vector<double> w;  // cells x N
  std::vector<double> offsets;

  [[nodiscard]] double at(int cell, int j) const { return w[static_cast<std::size_t>(cell * N + j)]; }
  [[nodiscard]] int observer_of(int cell) const { return cell % M; }
  [[nodiscard]] int step_of(int cell) const { return cell / M; }
};

Problem flatten(const WeightTensor& weights, const TaskingConstraints& constraints,
                const std::vector<double>& offsets = {}) {
  Problem p;
  p.M = weights.observers();
  p.N = weights.targets();
  p.L = weights.steps();
  if (p.M < 1 || p.N < 1 || p.L < 1) throw ValidationError("weight tensor must be non-empty");
  if (constraints.min_observations < 0) throw ValidationError("min_observations must be non-negative");
  p.cells = p.M * p.L;
  p.min_obs = constraints.min_observations;
  p.w.resize(static_cast<std::size_t>(p.cells * p.N));
  for (int k = 0; k < p.L; ++k) {
    for (int i = 0; i < p.M; ++i) {
      for (int j = 0; j < p.N; ++j) {
        const double value = weights(i, j, k);
        if (!std::isfinite(value) || value < 0.0) {
          std::ostringstream msg;
          msg << "weight (" << i << ", " << j << ", " << k << ") must be finite and non-negative";
          throw ValidationError(msg.str());
        }
        p.w[static_cast<std::size_t>((k * p.M + i) * p.N + j)] = value;
      }
    }
  }
  if (offsets.empty()) {
    p.offsets.assign(static_cast<std::size_t>(p.N), 0.0);
  } else {
    if (offsets.size() != static_cast<std::size_t>(p.N)) throw ValidationError("one target offset per target");
    p.offsets = offsets;
  }
  return p;
}

void require_coverable(const Problem& p) {
  if (static_cast<long long>(p.cells) < static_cast<long long>(p.min_obs) * p.N) {
    std::ostringstream msg;
    msg << "coverage infeasible: M*L = " << p.cells << " < " << p.min_obs << "*N = " << p.min_obs * p.N;
    throw InfeasibleError(msg.str());
  }
}

// choice[cell] is a target index or -1.
Allocation to_allocation(const Problem& p, const std::vector<int>& choice) {
  Allocation u(p.M, p.N, p.L, 0);
  for (int c = 0; c < p.cells; ++c) {
    if (choice[static_cast<std::size_t>(c)] >= 0) u(p.observer_of(c), choice[static_cast<std::size_t>(c)], p.step_of(c)) = 1;
  }
  return u;
}

// Reads an allocation back into per-cell choices; nullopt when some cell
// holds more than one target or the shape differs.
std::optional<std::vector<int>> to_choice(const Problem& p, const Allocation& u) {
  if (u.observers() != p.M || u.targets() != p.N || u.steps() != p.L) return std::nullopt;
  std::vector<int> choice(static_cast<std::size_t>(p.cells), -1);
  for (int c = 0; c < p.cells; ++c) {
    for (int j = 0; j < p.N; ++j) {
      if (u(p.observer_of(c), j, p.step_of(c)) != 0) {
        if (choice[static_cast<std::size_t>(c)] >= 0) return std::nullopt;
        choice[static_cast<std::size_t>(c)] = j;
      }
    }
  }
  return choice;
}

struct Totals {
  std::vector<double> per_target;
  std::vector<int> counts;
  double sum = 0.0;
};

Totals totals_of(const Problem& p, const std::vector<int>& choice) {
  Totals t{std::vector<double>(static_cast<std::size_t>(p.N), 0.0), std::vector<int>(static_cast<std::size_t>(p.N), 0),
           0.0};
  for (int c = 0; c < p.cells; ++c) {
    const int j = choice[static_cast<std::size_t>(c)];
    if (j < 0) continue;
    t.per_target[static_cast<std::size_t>(j)] += p.at(c, j);
    t.counts[static_cast<std::size_t>(j)] += 1;
    t.sum += p.at(c, j);
  }
  return t;
}

bool covered(const Problem& p, const std::vector<int>& counts) {
  return std::all_of(counts.begin(), counts.end(), [&](int n) { return n >= p.min_obs; });
}

double min_with_offsets(const Problem& p, const std::vector<double>& per_target) {
  double lowest = kInf;
  for (int j = 0; j < p.N; ++j) {
    lowest = std::min(lowest, p.offsets[static_cast<std::size_t>(j)] + per_target[static_cast<std::size_t>(j)]);
  }
  return lowest;
}

double objective_value(const Problem& p, const Totals& t, Objective objective) {
  return objective == Objective::MaxMin ? min_with_offsets(p, t.per_target) : t.sum;
}

SolveReport make_report(const Problem& p, Objective policy, const std::vector<int>& choice, Optimality optimality,
                        long long nodes, Clock::time_point start) {
  const Totals t = totals_of(p, choice);
  SolveReport r;
  r.policy = policy;
  r.allocation = to_allocation(p, choice);
  r.objective = objective_value(p, t, policy);
  r.per_target_traces = t.per_target;
  r.optimality = optimality;
  r.nodes_explored = nodes;
  r.coverage_feasible = covered(p, t.counts);
  r.wall_time_ms = elapsed_ms(start);
  return r;
}

// Seeds the incumbent with the best feasible warm start.
void adopt_warm_starts(const Problem& p, Objective objective, const SolverOptions& options, double& best,
                       std::vector<int>& best_choice) {
  for (const auto& start : options.warm_starts) {
    const auto choice = to_choice(p, start);
    if (!choice) continue;
    const Totals t = totals_of(p, *choice);
    if (!covered(p, t.counts)) continue;
    const double value = objective_value(p, t, objective);
    if (value > best + slack(best)) {
      best = value;
      best_choice = *choice;
    }
  }
}

// For every suffix of cells (from cell d on) and target j, the min_obs
// smallest values of loss(c, j), ascending, padded with +inf.
std::vector<double> suffix_smallest(const Problem& p, const std::vector<double>& loss) {
  const auto m = static_cast<std::size_t>(p.min_obs);
  const auto N = static_cast<std::size_t>(p.N);
  std::vector<double> table((static_cast<std::size_t>(p.cells) + 1) * N * m, kInf);
  for (int d = p.cells - 1; d >= 0; --d) {
    for (std::size_t j = 0; j < N; ++j) {
      const double* next = &table[((static_cast<std::size_t>(d) + 1) * N + j) * m];
      double* here = &table[(static_cast<std::size_t>(d) * N + j) * m];
      std::copy(next, next + m, here);
      double value = loss[static_cast<std::size_t>(d) * N + j];
      for (std::size_t r = 0; r < m; ++r) {
        if (value < here[r]) std::swap(value, here[r]);
      }
    }
  }
  return table;
}

class MaxTraceSearch {
 public:
  MaxTraceSearch(const Problem& p, long long node_limit) : p_(p), node_limit_(node_limit) {
    const auto N = static_cast<std::size_t>(p.N);
    cell_max_.resize(static_cast<std::size_t>(p.cells));
    order_.resize(static_cast<std::size_t>(p.cells));
    std::vector<double> loss(static_cast<std::size_t>(p.cells) * N);
    for (int c = 0; c < p.cells; ++c) {
      auto& order = order_[static_cast<std::size_t>(c)];
      order.resize(N);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p.at(c, a) > p.at(c, b); });
      cell_max_[static_cast<std::size_t>(c)] = p.at(c, order.front());
      for (std::size_t j = 0; j < N; ++j) {
        loss[static_cast<std::size_t>(c) * N + j] = cell_max_[static_cast<std::size_t>(c)] - p.at(c, static_cast<int>(j));
      }
    }
    suffix_max_.assign(static_cast<std::size_t>(p.cells) + 1, 0.0);
    for (int c = p.cells - 1; c >= 0; --c) {
      suffix_max_[static_cast<std::size_t>(c)] = suffix_max_[static_cast<std::size_t>(c) + 1] + cell_max_[static_cast<std::size_t>(c)];
    }
    smallest_ = suffix_smallest(p, loss);
  }

  void run(double& best, std::vector<int>& best_choice) {
    best_ = best;
    best_choice_ = best_choice;
    choice_.assign(static_cast<std::size_t>(p_.cells), -1);
    counts_.assign(static_cast<std::size_t>(p_.N), 0);
    dfs(0, 0.0);
    best = best_;
    best_choice = best_choice_;
  }

  [[nodiscard]] long long nodes() const { return nodes_; }
  [[nodiscard]] bool aborted() const { return aborted_; }

 private:
  // current + per-cell maxima, less the cheapest way to meet each deficit.
  [[nodiscard]] double bound(int d, double current) const {
    const auto m = static_cast<std::size_t>(p_.min_obs);
    const auto N = static_cast<std::size_t>(p_.N);
    int deficit = 0;
    double b = current + suffix_max_[static_cast<std::size_t>(d)];
    for (std::size_t j = 0; j < N; ++j) {
      const int need = p_.min_obs - counts_[j];
      if (need <= 0) continue;
      deficit += need;
      const double* small = &smallest_[(static_cast<std::size_t>(d) * N + j) * m];
      for (int r = 0; r < need; ++r) b -= small[r];
    }
    if (deficit > p_.cells - d) return -kInf;
    return b;
  }

  void dfs(int d, double current) {
    if (aborted_) return;
    if (++nodes_ > node_limit_) {
      aborted_ = true;
      return;
    }
    const double b = bound(d, current);
    if (!(b > best_ + slack(best_))) return;
    if (d == p_.cells) {
      best_ = current;
      best_choice_ = choice_;
      return;
    }
    for (int j : order_[static_cast<std::size_t>(d)]) {
      choice_[static_cast<std::size_t>(d)] = j;
      ++counts_[static_cast<std::size_t>(j)];
      dfs(d + 1, current + p_.at(d, j));
      --counts_[static_cast<std::size_t>(j)];
      if (aborted_) return;
    }
    choice_[static_cast<std::size_t>(d)] = -1;
  }

  const Problem& p_;
  long long node_limit_;
  std::vector<double> cell_max_;
  std::vector<std::vector<int>> order_;
  std::vector<double> suffix_max_;
  std::vector<double> smallest_;
  std::vector<int> choice_;
  std::vector<int> counts_;
  std::vector<int> best_choice_;
  double best_ = -kInf;
  long long nodes_ = 0;
  bool aborted_ = false;
};

// Best weight per cell, switching to the best still-uncovered target once
// the remaining cells are all needed for coverage. Always feasible when
// M L >= min_obs N.
std::vector<int> covering_greedy(const Problem& p) {
  const auto N = static_cast<std::size_t>(p.N);
  std::vector<int> choice(static_cast<std::size_t>(p.cells), -1);
  std::vector<int> counts(N, 0);
  for (int c = 0; c < p.cells; ++c) {
    int deficit = 0;
    for (std::size_t j = 0; j < N; ++j) deficit += std::max(0, p.min_obs - counts[j]);
    const bool forced = deficit >= p.cells - c;
    int pick = -1;
    for (std::size_t j = 0; j < N; ++j) {
      if (forced && counts[j] >= p.min_obs) continue;
      if (pick < 0 || p.at(c, static_cast<int>(j)) > p.at(c, pick)) pick = static_cast<int>(j);
    }
    choice[static_cast<std::size_t>(c)] = pick;
    ++counts[static_cast<std::size_t>(pick)];
  }
  return choice;
}

// Multipliers lambda on the simplex minimizing the Lagrangian bound
// sum_j lambda_j o_j + sum_c max_j lambda_j w_cj, found by exponentiated
// subgradient steps. Any lambda on the simplex gives a valid bound.
std::vector<double> lagrange_multipliers(const Problem& p) {
  const auto N = static_cast<std::size_t>(p.N);
  std::vector<double> lambda(N, 1.0 / static_cast<double>(N));
  std::vector<double> best_lambda = lambda;
  double best_value = kInf;
  std::vector<double> grad(N);
  for (int iter = 0; iter < 4000; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double value = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      value += lambda[j] * p.offsets[j];
      grad[j] = p.offsets[j];
    }
    for (int c = 0; c < p.cells; ++c) {
      std::size_t arg = 0;
      double top = -kInf;
      for (std::size_t j = 0; j < N; ++j) {
        const double v = lambda[j] * p.at(c, static_cast<int>(j));
        if (v > top) {
          top = v;
          arg = j;
        }
      }
      value += top;
      grad[arg] += p.at(c, static_cast<int>(arg));
    }
    if (value < best_value) {
      best_value = value;
      best_lambda = lambda;
    }
    const double scale = *std::max_element(grad.begin(), grad.end());
    if (!(scale > 0.0)) break;
    const double step = 2.0 / std::sqrt(1.0 + iter);
    double norm = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      lambda[j] *= std::exp(-step * grad[j] / scale);
      lambda[j] = std::max(lambda[j], 1e-300);
      norm += lambda[j];
    }
    for (auto& l : lambda) l /= norm;
  }
  return best_lambda;
}

// Leximin comparison of per-target totals (offsets included): true when a
// is strictly better than b.
bool leximin_better(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] > b[j] + slack(b[j])) return true;
    if (a[j] < b[j] - slack(b[j])) return false;
  }
  return false;
}

// Greedy fill plus single-cell moves and pairwise swaps that improve the
// leximin order while keeping coverage.
std::vector<int> max_min_heuristic(const Problem& p) {
  const auto N = static_cast<std::size_t>(p.N);
  std::vector<int> choice(static_cast<std::size_t>(p.cells), -1);
  std::vector<double> level = p.offsets;
  std::vector<int> counts(N, 0);
  for (int c = 0; c < p.cells; ++c) {
    int deficit = 0;
    for (std::size_t j = 0; j < N; ++j) deficit += std::max(0, p.min_obs - counts[j]);
    const bool forced = deficit >= p.cells - c;
    int pick = -1;
    for (std::size_t j = 0; j < N; ++j) {
      if (forced && counts[j] >= p.min_obs) continue;
      if (pick < 0) {
        pick = static_cast<int>(j);
        continue;
      }
      const auto pj = static_cast<std::size_t>(pick);
      // Prefer the lower current level; break near-ties by the larger weight.
      if (level[j] < level[pj] - slack(level[pj]) ||
          (std::abs(level[j] - level[pj]) <= slack(level[pj]) && p.at(c, static_cast<int>(j)) > p.at(c, pick))) {
        pick = static_cast<int>(j);
      }
    }
    choice[static_cast<std::size_t>(c)] = pick;
    level[static_cast<std::size_t>(pick)] += p.at(c, pick);
    ++counts[static_cast<std::size_t>(pick)];
  }

  bool improved = true;
  for (int pass = 0; improved && pass < 200; ++pass) {
    improved = false;
    for (int c = 0; c < p.cells; ++c) {
      const int from = choice[static_cast<std::size_t>(c)];
      const auto f = static_cast<std::size_t>(from);
      if (counts[f] <= p.min_obs) continue;
      for (std::size_t to = 0; to < N; ++to) {
        if (static_cast<int>(to) == from) continue;
        std::vector<double> trial = level;
        trial[f] -= p.at(c, from);
        trial[to] += p.at(c, static_cast<int>(to));
        if (leximin_better(trial, level)) {
          level = trial;
          --counts[f];
          ++counts[to];
          choice[static_cast<std::size_t>(c)] = static_cast<int>(to);
          improved = true;
          break;
        }
      }
    }
    for (int a = 0; a < p.cells; ++a) {
      for (int b = a + 1; b < p.cells; ++b) {
        const int ja = choice[static_cast<std::size_t>(a)];
        const int jb = choice[static_cast<std::size_t>(b)];
        if (ja == jb) continue;
        std::vector<double> trial = level;
        trial[static_cast<std::size_t>(ja)] += p.at(b, ja) - p.at(a, ja);
        trial[static_cast<std::size_t>(jb)] += p.at(a, jb) - p.at(b, jb);
        if (leximin_better(trial, level)) {
          level = trial;
          choice[static_cast<std::size_t>(a)] = jb;
          choice[static_cast<std::size_t>(b)] = ja;
          improved = true;
        }
      }
    }
    if (improved) continue;
    // Three-cell rotations: a takes b's target, b takes c's, c takes a's.
    for (int a = 0; a < p.cells && !improved; ++a) {
      for (int b = 0; b < p.cells && !improved; ++b) {
        for (int c = 0; c < p.cells && !improved; ++c) {
          const int ja = choice[static_cast<std::size_t>(a)];
          const int jb = choice[static_cast<std::size_t>(b)];
          const int jc = choice[static_cast<std::size_t>(c)];
          if (ja == jb || jb == jc || ja == jc) continue;
          std::vector<double> trial = level;
          trial[static_cast<std::size_t>(ja)] += p.at(c, ja) - p.at(a, ja);
          trial[static_cast<std::size_t>(jb)] += p.at(a, jb) - p.at(b, jb);
          trial[static_cast<std::size_t>(jc)] += p.at(b, jc) - p.at(c, jc);
          if (leximin_better(trial, level)) {
            level = trial;
            choice[static_cast<std::size_t>(a)] = jb;
            choice[static_cast<std::size_t>(b)] = jc;
            choice[static_cast<std::size_t>(c)] = ja;
            improved = true;
          }
        }
      }
    }
  }
  return choice;
}

class MaxMinSearch {
 public:
  MaxMinSearch(const Problem& p, long long node_limit) : p_(p), node_limit_(node_limit) {
    const auto N = static_cast<std::size_t>(p.N);
    const auto C = static_cast<std::size_t>(p.cells);
    lambda_ = lagrange_multipliers(p);
    suffix_w_.assign((C + 1) * N, 0.0);
    suffix_lagrange_.assign(C + 1, 0.0);
    order_.resize(C);
    for (int c = p.cells - 1; c >= 0; --c) {
      const auto cc = static_cast<std::size_t>(c);
      double top = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        suffix_w_[cc * N + j] = suffix_w_[(cc + 1) * N + j] + p.at(c, static_cast<int>(j));
        top = std::max(top, lambda_[j] * p.at(c, static_cast<int>(j)));
      }
      suffix_lagrange_[cc] = suffix_lagrange_[cc + 1] + top;
      auto& order = order_[cc];
      order.resize(N);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return lambda_[static_cast<std::size_t>(a)] * p.at(c, a) > lambda_[static_cast<std::size_t>(b)] * p.at(c, b);
      });
    }
    // top_[(d * N + j) * (C + 1) + q]: sum of the q largest w(c, j) over
    // cells c >= d. Skipped for very long horizons (full suffix sums then).
    if ((C + 1) * (C + 1) * N <= 50'000'000) {
      top_.assign((C + 1) * N * (C + 1), 0.0);
      std::vector<double> column;
      for (std::size_t d = 0; d < C; ++d) {
        for (std::size_t j = 0; j < N; ++j) {
          column.clear();
          for (std::size_t c = d; c < C; ++c) column.push_back(p.at(static_cast<int>(c), static_cast<int>(j)));
          std::sort(column.begin(), column.end(), std::greater<>());
          double* row = &top_[(d * N + j) * (C + 1)];
          for (std::size_t q = 0; q < column.size(); ++q) row[q + 1] = row[q] + column[q];
          for (std::size_t q = column.size() + 1; q <= C; ++q) row[q] = row[column.size()];
        }
      }
    }
  }

  void run(double& best, std::vector<int>& best_choice) {
    best_ = best;
    best_choice_ = best_choice;
    choice_.assign(static_cast<std::size_t>(p_.cells), -1);
    counts_.assign(static_cast<std::size_t>(p_.N), 0);
    level_ = p_.offsets;
    dfs(0);
    best = best_;
    best_choice = best_choice_;
  }

  [[nodiscard]] long long nodes() const { return nodes_; }
  [[nodiscard]] bool aborted() const { return aborted_; }
  [[nodiscard]] double root_bound() const {
    double lagrange = suffix_lagrange_[0];
    double single = kInf;
    for (std::size_t j = 0; j < lambda_.size(); ++j) {
      lagrange += lambda_[j] * p_.offsets[j];
      single = std::min(single, p_.offsets[j] + suffix_w_[j]);
    }
    return std::min(lagrange, single);
  }

 private:
  [[nodiscard]] double bound(int d) const {
    const auto N = static_cast<std::size_t>(p_.N);
    const auto dd = static_cast<std::size_t>(d);
    const int remaining = p_.cells - d;
    int deficit = 0;
    double lagrange = suffix_lagrange_[dd];
    for (std::size_t j = 0; j < N; ++j) {
      deficit += std::max(0, p_.min_obs - counts_[j]);
      lagrange += lambda_[j] * level_[j];
    }
    if (deficit > remaining) return -kInf;
    // Target j can take at most the cells not reserved for other deficits.
    double single = kInf;
    const auto stride = static_cast<std::size_t>(p_.cells) + 1;
    for (std::size_t j = 0; j < N; ++j) {
      const double reach =
          top_.empty() ? suffix_w_[dd * N + j]
                       : top_[(dd * N + j) * stride +
                              static_cast<std::size_t>(remaining - deficit + std::max(0, p_.min_obs - counts_[j]))];
      single = std::min(single, level_[j] + reach);
    }
    return std::min(single, lagrange);
  }

  void dfs(int d) {
    if (aborted_) return;
    if (++nodes_ > node_limit_) {
      aborted_ = true;
      return;
    }
    const double b = bound(d);
    if (!(b > best_ + slack(best_))) return;
    if (d == p_.cells) {
      best_ = *std::min_element(level_.begin(), level_.end());
      best_choice_ = choice_;
      return;
    }
    for (int j : order_[static_cast<std::size_t>(d)]) {
      const auto jj = static_cast<std::size_t>(j);
      choice_[static_cast<std::size_t>(d)] = j;
      ++counts_[jj];
      const double before = level_[jj];
      level_[jj] += p_.at(d, j);
      dfs(d + 1);
      level_[jj] = before;
      --counts_[jj];
      if (aborted_) return;
    }
    choice_[static_cast<std::size_t>(d)] = -1;
  }

  const Problem& p_;
  long long node_limit_;
  std::vector<double> lambda_;
  std::vector<double> suffix_w_;
  std::vector<double> suffix_lagrange_;
  std::vector<double> top_;
  std::vector<std::vector<int>> order_;
  std::vector<int> choice_;
  std::vector<int> counts_;
  std::vector<double> level_;
  std::vector<int> best_choice_;
  double best_ = -kInf;
  long long nodes_ = 0;
  bool aborted_ = false;
};

}  // namespace

WeightModel build_weight_model(std::span<const Trajectory> observers, std::span<const Trajectory> targets,
                               const NoiseModel& noise, const Schedule& schedule,
                               const TaskingConstraints& constraints) {
  const int M = static_cast<int>(observers.size());
  const int N = static_cast<int>(targets.size());
  const int L = schedule.steps();
  if (M < 1 || N < 1) throw ValidationError("need at least one observer and one target");
  if (L < 1) throw ValidationError("schedule must have at least one step");
  if (static_cast<long long>(M) * L < static_cast<long long>(constraints.min_observations) * N) {
    std::ostringstream msg;
    msg << "coverage infeasible: M*L = " << M * L << " < " << constraints.min_observations
        << "*N = " << constraints.min_observations * N;
    throw InfeasibleError(msg.str());
  }

  const auto Lu = static_cast<std::size_t>(L);
  std::vector<StateVector> observer_states(static_cast<std::size_t>(M) * Lu);
  std::vector<StateVector> target_states(static_cast<std::size_t>(N) * Lu);
  std::vector<Matrix6> phi_back(static_cast<std::size_t>(N) * Lu);
  parallel_for(static_cast<std::size_t>(M) * Lu, [&](std::size_t n) {
    observer_states[n] = observers[n / Lu].state_at(schedule.t_prime[n % Lu]);
  });
  parallel_for(static_cast<std::size_t>(N) * Lu, [&](std::size_t n) {
    const Trajectory& target = targets[n / Lu];
    const double t_meas = schedule.t_prime[n % Lu];
    target_states[n] = target.state_at(t_meas);
    phi_back[n] = target.stm(t_meas, schedule.t_L).phi;
  });

  WeightModel model{WeightTensor(M, N, L), WeightTensor(M, N, L), Tensor3<InformationMatrix>(M, N, L)};
  parallel_for(static_cast<std::size_t>(M * N) * Lu, [&](std::size_t n) {
    const int k = static_cast<int>(n % Lu);
    const int j = static_cast<int>((n / Lu) % static_cast<std::size_t>(N));
    const int i = static_cast<int>(n / (Lu * static_cast<std::size_t>(N)));
    const auto obs = observer_states[static_cast<std::size_t>(i) * Lu + static_cast<std::size_t>(k)];
    const auto tgt = target_states[static_cast<std::size_t>(j) * Lu + static_cast<std::size_t>(k)];
    const InformationMatrix gain = info_gain(jacobian_target(relative_state(obs, tgt)), noise);
    const InformationMatrix projected =
        eif_predict_noiseless(gain, phi_back[static_cast<std::size_t>(j) * Lu + static_cast<std::size_t>(k)]);
    model.instantaneous(i, j, k) = gain.trace();
    model.projected(i, j, k) = projected.trace();
    model.projected_info(i, j, k) = projected;
  });
  return model;
}

WeightTensor build_weights(std::span<const Trajectory> observers, std::span<const Trajectory> targets,
                           const NoiseModel& noise, const Schedule& schedule, const TaskingConstraints& constraints) {
  return build_weight_model(observers, targets, noise, schedule, constraints).projected;
}

SolveReport solve_max_trace(const WeightTensor& weights, const TaskingConstraints& constraints,
                            const SolverOptions& options) {
  const auto start = Clock::now();
  const Problem p = flatten(weights, constraints);
  require_coverable(p);
  double best = -kInf;
  std::vector<int> best_choice;
  adopt_warm_starts(p, Objective::MaxTrace, options, best, best_choice);
  MaxTraceSearch search(p, options.node_limit);
  search.run(best, best_choice);
  if (best_choice.empty()) best_choice = covering_greedy(p);
  return make_report(p, Objective::MaxTrace, best_choice, search.aborted() ? Optimality::Heuristic : Optimality::Proven,
                     search.nodes(), start);
}

SolveReport solve_max_min(const WeightTensor& weights, const TaskingConstraints& constraints,
                          const SolverOptions& options) {
  const auto start = Clock::now();
  const Problem p = flatten(weights, constraints, options.target_offsets);
  require_coverable(p);
  std::vector<int> best_choice = max_min_heuristic(p);
  double best = min_with_offsets(p, totals_of(p, best_choice).per_target);
  adopt_warm_starts(p, Objective::MaxMin, options, best, best_choice);
  MaxMinSearch search(p, options.node_limit);
  search.run(best, best_choice);
  return make_report(p, Objective::MaxMin, best_choice, search.aborted() ? Optimality::Heuristic : Optimality::Proven,
                     search.nodes(), start);
}

SolveReport myopic_policy(const WeightTensor& instantaneous, const TaskingConstraints& constraints) {
  const auto start = Clock::now();
  const Problem p = flatten(instantaneous, constraints);
  std::vector<int> choice(static_cast<std::size_t>(p.cells), 0);
  for (int c = 0; c < p.cells; ++c) {
    int arg = 0;
    for (int j = 1; j < p.N; ++j) {
      if (p.at(c, j) > p.at(c, arg)) arg = j;
    }
    choice[static_cast<std::size_t>(c)] = arg;
  }
  return make_report(p, Objective::Myopic, choice, Optimality::Heuristic, p.cells, start);
}

SolveReport brute_force_oracle(const WeightTensor& weights, Objective objective,
                               const TaskingConstraints& constraints, const SolverOptions& options) {
  const auto start = Clock::now();
  if (objective == Objective::Myopic) throw ValidationError("the oracle solves max_trace or max_min only");
  const Problem p = flatten(weights, constraints, objective == Objective::MaxMin ? options.target_offsets
                                                                                 : std::vector<double>{});
  const double space = std::pow(static_cast<double>(p.N + 1), p.cells);
  if (space > 1e7) {
    std::ostringstream msg;
    msg << "instance too large for enumeration: " << space << " assignments";
    throw ValidationError(msg.str());
  }
  require_coverable(p);

  // Odometer over choices -1..N-1, last cell fastest.
  std::vector<int> choice(static_cast<std::size_t>(p.cells), -1);
  std::vector<int> best_choice;
  double best = -kInf;
  long long visited = 0;
  while (true) {
    ++visited;
    const Totals t = totals_of(p, choice);
    if (covered(p, t.counts)) {
      const double value = objective_value(p, t, objective);
      if (best_choice.empty() || value > best + slack(best)) {
        best = value;
        best_choice = choice;
      }
    }
    int c = p.cells - 1;
    while (c >= 0 && choice[static_cast<std::size_t>(c)] == p.N - 1) {
      choice[static_cast<std::size_t>(c)] = -1;
      --c;
    }
    if (c < 0) break;
    ++choice[static_cast<std::size_t>(c)];
  }
  if (best_choice.empty()) throw InfeasibleError("no allocation satisfies the coverage constraint");
  return make_report(p, objective, best_choice, Optimality::Proven, visited, start);
}

AllocationCheck validate_allocation(const Allocation& allocation, const WeightTensor& weights,
                                    const TaskingConstraints& constraints) {
  if (allocation.observers() != weights.observers() || allocation.targets() != weights.targets() ||
      allocation.steps() != weights.steps()) {
    throw ValidationError("allocation and weight shapes differ");
  }
  const int M = weights.observers();
  const int N = weights.targets();
  const int L = weights.steps();
  AllocationCheck check;
  check.per_target_traces.assign(static_cast<std::size_t>(N), 0.0);
  check.per_target_counts.assign(static_cast<std::size_t>(N), 0);
  for (int k = 0; k < L; ++k) {
    for (int i = 0; i < M; ++i) {
      int assigned = 0;
      for (int j = 0; j < N; ++j) {
        if (allocation(i, j, k) == 0) continue;
        ++assigned;
        check.per_target_traces[static_cast<std::size_t>(j)] += weights(i, j, k);
        ++check.per_target_counts[static_cast<std::size_t>(j)];
        check.total += weights(i, j, k);
      }
      if (assigned > 1) check.single_observation_ok = false;
    }
  }
  check.coverage_ok = std::all_of(check.per_target_counts.begin(), check.per_target_counts.end(),
                                  [&](int n) { return n >= constraints.min_observations; });
  return check;
}

}  // namespace cislunar
