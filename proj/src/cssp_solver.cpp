/*
 * Copyright 2026 The HCSSP Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hcssp/cssp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "hcssp/error.hpp"
#include "hcssp/kernels.hpp"

namespace hcssp {

bool is_feasible(const PolicyValue& value) {
  return std::all_of(value.g.begin(), value.g.end(),
                     [](double gi) { return gi <= kFeasibilityTolerance; });
}

namespace {

constexpr double kValueIterationTolerance = 1e-10;
constexpr std::size_t kValueIterationSweeps = 20000;
constexpr std::size_t kPolicyIterationLimit = 500;
constexpr double kImprovementTolerance = 1e-10;
constexpr double kTieTolerance = 1e-9;
constexpr std::size_t kDenseLimit = 200;

double scale_of(double v) { return std::max(1.0, std::abs(v)); }

}  // namespace

// ---------------------------------------------------------------------------
// WeightedSspSolver

WeightedSspSolver::WeightedSspSolver(const CsspModel& model) : model_(model) {
  for (std::size_t i = 0; i < model.num_cost_functions(); ++i) {
    expected_.push_back(model.expected_costs(i));
  }
  const std::size_t n = model.num_states();
  action_state_.resize(model.num_global_actions());
  std::vector<std::size_t> count(n + 1, 0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto sid = static_cast<StateId>(s);
    for (std::size_t a = 0; a < model.num_actions(sid); ++a) {
      const std::size_t ga = model.global_action(sid, static_cast<int>(a));
      action_state_[ga] = sid;
      for (std::size_t o = model.outcome_begin(ga); o < model.outcome_end(ga); ++o) {
        const Outcome& out = model.all_outcomes()[o];
        if (out.prob > 0.0) ++count[out.next + 1];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) count[i + 1] += count[i];
  pred_begin_ = count;
  pred_.resize(count.back());
  std::vector<std::size_t> fill(count.begin(), count.end() - 1);
  for (std::size_t s = 0; s < n; ++s) {
    const auto sid = static_cast<StateId>(s);
    for (std::size_t a = 0; a < model.num_actions(sid); ++a) {
      const std::size_t ga = model.global_action(sid, static_cast<int>(a));
      for (std::size_t o = model.outcome_begin(ga); o < model.outcome_end(ga); ++o) {
        const Outcome& out = model.all_outcomes()[o];
        if (out.prob > 0.0) pred_[fill[out.next]++] = {sid, static_cast<std::uint32_t>(a)};
      }
    }
  }
}

WeightedSspSolver::GoalReach WeightedSspSolver::goal_reach(std::span<const std::uint8_t> usable) const {
  const CsspModel& m = model_;
  const std::size_t n = m.num_states();
  const std::size_t num_actions = m.num_global_actions();
  const auto outcomes = m.all_outcomes();
  GoalReach out;
  out.alive.assign(n, 1);
  out.safe.assign(num_actions, 0);
  out.attractor.assign(n, -1);
  std::vector<std::uint8_t> reach(n, 0);
  for (;;) {
    for (std::size_t a = 0; a < num_actions; ++a) {
      bool ok = usable.empty() || usable[a];
      for (std::size_t o = m.outcome_begin(a); ok && o < m.outcome_end(a); ++o) {
        if (outcomes[o].prob > 0.0 && !out.alive[outcomes[o].next]) ok = false;
      }
      out.safe[a] = ok ? 1 : 0;
    }
    std::fill(reach.begin(), reach.end(), 0);
    std::fill(out.attractor.begin(), out.attractor.end(), -1);
    std::deque<StateId> frontier;
    for (StateId g : m.goals()) {
      reach[g] = 1;
      frontier.push_back(g);
    }
    while (!frontier.empty()) {
      const StateId t = frontier.front();
      frontier.pop_front();
      for (std::size_t e = pred_begin_[t]; e < pred_begin_[t + 1]; ++e) {
        const auto [s, a] = pred_[e];
        if (reach[s] || m.is_goal(s)) continue;
        if (!out.safe[m.global_action(s, static_cast<int>(a))]) continue;
        reach[s] = 1;
        out.attractor[s] = static_cast<int>(a);
        frontier.push_back(s);
      }
    }
    if (reach == out.alive) break;
    out.alive = reach;
  }
  return out;
}

std::optional<double> WeightedSspSolver::min_expected_cost(std::size_t index,
                                                           std::span<const std::uint8_t> usable) const {
  const CsspModel& m = model_;
  const std::size_t n = m.num_states();
  const auto outcomes = m.all_outcomes();
  const GoalReach gr = goal_reach(usable);
  for (std::size_t s = 0; s < n; ++s) {
    if (m.initial()[s] > 0.0 && !gr.alive[s]) return std::nullopt;
  }
  // Policy iteration on the pair (C_index, C_0) compared lexicographically,
  // i.e. on C_index + delta * C_0 for infinitesimal delta. The primary cost
  // is positive on cycles, so improper policies never look attractive.
  std::vector<int> local(n, -1);
  std::vector<StateId> states;
  for (std::size_t s = 0; s < n; ++s) {
    if (gr.alive[s] && !m.is_goal(static_cast<StateId>(s))) {
      local[s] = static_cast<int>(states.size());
      states.push_back(static_cast<StateId>(s));
    }
  }
  const std::vector<double>& cost = expected_[index];
  const std::vector<double>& tie = expected_[0];
  std::vector<int> policy(gr.attractor);
  std::vector<double> vg(n, 0.0), vf(n, 0.0);
  const std::size_t k = states.size();
  auto evaluate = [&] {
    if (k == 0) return;
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::MatrixXd rhs(static_cast<Eigen::Index>(k), 2);
    for (std::size_t i = 0; i < k; ++i) {
      const StateId s = states[i];
      const std::size_t ga = m.global_action(s, policy[s]);
      rhs(static_cast<Eigen::Index>(i), 0) = cost[ga];
      rhs(static_cast<Eigen::Index>(i), 1) = tie[ga];
      trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
      for (std::size_t o = m.outcome_begin(ga); o < m.outcome_end(ga); ++o) {
        if (outcomes[o].prob > 0.0 && local[outcomes[o].next] >= 0) {
          trips.emplace_back(static_cast<int>(i), local[outcomes[o].next], -outcomes[o].prob);
        }
      }
    }
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::MatrixXd x;
    if (k <= kDenseLimit) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(A)};
      x = lu.solve(rhs);
      x += lu.solve(rhs - A * x);
    } else {
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(A);
      if (lu.info() != Eigen::Success) throw Error(Errc::ImproperPolicy, "policy evaluation system is singular");
      x = lu.solve(rhs);
      x += lu.solve(rhs - A * x);
    }
    for (std::size_t i = 0; i < k; ++i) {
      vg[states[i]] = x(static_cast<Eigen::Index>(i), 0);
      vf[states[i]] = x(static_cast<Eigen::Index>(i), 1);
    }
  };
  auto q_pair = [&](StateId s, int a) {
    const std::size_t ga = m.global_action(s, a);
    double qg = cost[ga], qf = tie[ga];
    for (std::size_t o = m.outcome_begin(ga); o < m.outcome_end(ga); ++o) {
      if (outcomes[o].prob > 0.0) {
        qg += outcomes[o].prob * vg[outcomes[o].next];
        qf += outcomes[o].prob * vf[outcomes[o].next];
      }
    }
    return std::pair{qg, qf};
  };
  evaluate();
  for (std::size_t iter = 0; iter < kPolicyIterationLimit; ++iter) {
    bool changed = false;
    for (StateId s : states) {
      auto [cg, cf] = q_pair(s, policy[s]);
      for (int a = 0; a < static_cast<int>(m.num_actions(s)); ++a) {
        if (a == policy[s] || !gr.safe[m.global_action(s, a)]) continue;
        auto [qg, qf] = q_pair(s, a);
        const double tol_g = kImprovementTolerance * scale_of(cg);
        const bool better = qg < cg - tol_g ||
                            (qg <= cg + tol_g && qf < cf - kImprovementTolerance * scale_of(cf));
        if (better) {
          policy[s] = a;
          cg = qg;
          cf = qf;
          changed = true;
        }
      }
    }
    if (!changed) break;
    evaluate();
  }
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    if (m.initial()[s] > 0.0) total += m.initial()[s] * vg[s];
  }
  return total;
}

std::optional<WeightedSolution> WeightedSspSolver::solve(std::span<const double> lambda,
                                                         std::span<const std::uint8_t> usable,
                                                         std::span<const double> warm_start) const {
  const CsspModel& m = model_;
  if (lambda.size() != m.num_secondary()) {
    throw Error(Errc::DimensionMismatch, "lambda has " + std::to_string(lambda.size()) +
                                             " entries, model has " +
                                             std::to_string(m.num_secondary()));
  }
  const std::size_t n = m.num_states();
  const std::size_t num_actions = m.num_global_actions();
  const auto outcomes = m.all_outcomes();

  // Scalarized expected one-step cost per global action.
  std::vector<double> q(expected_[0]);
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < 0.0) throw Error(Errc::InvalidModel, "lambda must be nonnegative");
    if (lambda[i] == 0.0) continue;
    for (std::size_t a = 0; a < num_actions; ++a) q[a] += lambda[i] * expected_[i + 1][a];
  }

  GoalReach gr = goal_reach(usable);
  const std::vector<std::uint8_t>& alive = gr.alive;
  const std::vector<std::uint8_t>& safe = gr.safe;
  const std::vector<int>& attractor = gr.attractor;
  for (std::size_t s = 0; s < n; ++s) {
    if (m.initial()[s] > 0.0 && !alive[s]) return std::nullopt;
  }

  std::vector<std::uint8_t> active(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    active[s] = (alive[s] && !m.is_goal(static_cast<StateId>(s))) ? 1 : 0;
  }

  // Value iteration warm start.
  std::vector<double> v(n, 0.0), next(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    if (!alive[s]) {
      v[s] = kInf;
    } else if (active[s] && s < warm_start.size() && std::isfinite(warm_start[s])) {
      v[s] = std::max(0.0, warm_start[s]);
    }
  }
  const kernels::BellmanView view{m.action_offsets(), m.outcome_offsets(), outcomes, q, safe, active};
  for (std::size_t sweep = 0; sweep < kValueIterationSweeps; ++sweep) {
    const double residual = kernels::bellman_sweep(view, v, next);
    v.swap(next);
    double scale = 1.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (active[s]) scale = std::max(scale, std::abs(v[s]));
    }
    if (residual <= kValueIterationTolerance * scale) break;
  }

  auto q_value = [&](StateId s, std::size_t a, const std::vector<double>& values) {
    const std::size_t ga = m.global_action(s, static_cast<int>(a));
    double acc = q[ga];
    for (std::size_t o = m.outcome_begin(ga); o < m.outcome_end(ga); ++o) {
      if (outcomes[o].prob > 0.0) acc += outcomes[o].prob * values[outcomes[o].next];
    }
    return acc;
  };
  // Lowest-index action within the tie band of the best Q.
  auto greedy = [&](StateId s, const std::vector<double>& values, double& best_out) {
    double best = kInf;
    const std::size_t na = m.num_actions(s);
    std::vector<double> qs(na, kInf);
    for (std::size_t a = 0; a < na; ++a) {
      if (!safe[m.global_action(s, static_cast<int>(a))]) continue;
      qs[a] = q_value(s, a, values);
      best = std::min(best, qs[a]);
    }
    best_out = best;
    for (std::size_t a = 0; a < na; ++a) {
      if (qs[a] <= best + kTieTolerance * scale_of(best)) return static_cast<int>(a);
    }
    return -1;
  };

  std::vector<int> policy(n, -1);
  for (std::size_t s = 0; s < n; ++s) {
    if (!active[s]) continue;
    double best;
    policy[s] = greedy(static_cast<StateId>(s), v, best);
  }

  // Replaces actions of states that cannot reach the goal under `pol` by
  // their attractor action. Returns true if anything changed.
  auto make_proper = [&](std::vector<int>& pol) {
    std::vector<std::uint8_t> ok(n, 0);
    std::deque<StateId> frontier;
    for (StateId g : m.goals()) {
      ok[g] = 1;
      frontier.push_back(g);
    }
    while (!frontier.empty()) {
      const StateId t = frontier.front();
      frontier.pop_front();
      for (std::size_t e = pred_begin_[t]; e < pred_begin_[t + 1]; ++e) {
        const auto [s, a] = pred_[e];
        if (ok[s] || !active[s] || pol[s] != static_cast<int>(a)) continue;
        ok[s] = 1;
        frontier.push_back(s);
      }
    }
    bool changed = false;
    for (std::size_t s = 0; s < n; ++s) {
      if (active[s] && !ok[s]) {
        pol[s] = attractor[s];
        changed = true;
      }
    }
    return changed;
  };

  // Exact cost-to-go of a proper policy over the active states.
  std::vector<int> local(n, -1);
  std::vector<StateId> states;
  for (std::size_t s = 0; s < n; ++s) {
    if (active[s]) {
      local[s] = static_cast<int>(states.size());
      states.push_back(static_cast<StateId>(s));
    }
  }
  auto evaluate = [&](const std::vector<int>& pol) {
    std::vector<double> values(n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      if (!alive[s]) values[s] = kInf;
    }
    const std::size_t k = states.size();
    if (k == 0) return values;
    if (k <= kDirectSolveLimit) {
      std::vector<Eigen::Triplet<double>> trips;
      Eigen::VectorXd rhs(static_cast<Eigen::Index>(k));
      for (std::size_t i = 0; i < k; ++i) {
        const StateId s = states[i];
        const std::size_t ga = m.global_action(s, pol[s]);
        rhs[static_cast<Eigen::Index>(i)] = q[ga];
        trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
        for (std::size_t o = m.outcome_begin(ga); o < m.outcome_end(ga); ++o) {
          const Outcome& out = outcomes[o];
          if (out.prob > 0.0 && local[out.next] >= 0) {
            trips.emplace_back(static_cast<int>(i), local[out.next], -out.prob);
          }
        }
      }
      Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
      A.setFromTriplets(trips.begin(), trips.end());
      Eigen::VectorXd x;
      if (k <= kDenseLimit) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(A)};
        x = lu.solve(rhs);
        x += lu.solve(rhs - A * x);
      } else {
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success) {
          throw Error(Errc::ImproperPolicy, "policy evaluation system is singular");
        }
        x = lu.solve(rhs);
        x += lu.solve(rhs - A * x);
      }
      for (std::size_t i = 0; i < k; ++i) values[states[i]] = x[static_cast<Eigen::Index>(i)];
      return values;
    }
    std::vector<std::uint8_t> only(num_actions, 0);
    for (StateId s : states) only[m.global_action(s, pol[s])] = 1;
    const kernels::BellmanView fixed{m.action_offsets(), m.outcome_offsets(), outcomes, q, only, active};
    std::vector<double> scratch = values;
    for (StateId s : states) values[s] = v[s];
    for (std::size_t sweep = 0; sweep < 1'000'000; ++sweep) {
      const double residual = kernels::bellman_sweep(fixed, values, scratch);
      values.swap(scratch);
      double scale = 1.0;
      for (StateId s : states) scale = std::max(scale, std::abs(values[s]));
      if (residual <= 1e-12 * scale) return values;
    }
    throw Error(Errc::ImproperPolicy, "policy evaluation did not contract");
  };

  make_proper(policy);
  std::vector<double> values = evaluate(policy);
  for (std::size_t iter = 0; iter < kPolicyIterationLimit; ++iter) {
    bool changed = false;
    for (StateId s : states) {
      const double current = q_value(s, static_cast<std::size_t>(policy[s]), values);
      double best;
      const int a = greedy(s, values, best);
      // The greedy pick may be the current action when it sits in the tie band.
      if (a != policy[s] && q_value(s, static_cast<std::size_t>(a), values) <
                                current - kImprovementTolerance * scale_of(current)) {
        policy[s] = a;
        changed = true;
      }
    }
    if (!changed) break;
    make_proper(policy);
    values = evaluate(policy);
  }

  // Lexicographic tie normalization among optimal actions.
  std::vector<int> normalized = policy;
  for (StateId s : states) {
    double best;
    normalized[s] = greedy(s, values, best);
  }
  std::vector<int> check = normalized;
  if (!make_proper(check)) policy = std::move(normalized);

  DeterministicPolicy full(n);
  for (StateId s : states) full.set(s, policy[s]);

  WeightedSolution out;
  out.policy = restrict_to_reachable(m, full);
  out.value = evaluate_policy(m, out.policy);
  out.scalarized = lagrangian(out.value.f, out.value.g, lambda);
  out.cost_to_go = std::move(values);
  return out;
}

WeightedSolution solve_weighted_ssp(const CsspModel& model, std::span<const double> lambda,
                                    std::span<const double> heuristic) {
  WeightedSspSolver solver(model);
  auto sol = solver.solve(lambda, {}, heuristic);
  if (!sol) {
    throw Error(Errc::NoProperPolicy, "goal is not reachable almost surely from the initial support");
  }
  return std::move(*sol);
}

// ---------------------------------------------------------------------------
// Dual ascent

namespace {

struct Probe {
  double lambda = 0.0;
  WeightedSolution sol;
  double f() const { return sol.value.f; }
  double g() const { return sol.value.g[0]; }
};

class DualSearch {
 public:
  DualSearch(const CsspModel& model, std::span<const double> heuristic)
      : solver_(model), warm_(heuristic.begin(), heuristic.end()) {}

  std::optional<WeightedSolution> solve(std::span<const double> lambda) {
    auto sol = solver_.solve(lambda, {}, warm_);
    ++solves;
    if (!sol) return std::nullopt;
    warm_ = sol->cost_to_go;
    if (is_feasible(sol->value) && (!best_feasible || sol->value.f < best_feasible->value.f)) {
      best_feasible = Candidate{sol->policy, sol->value, 0.0};
    }
    return sol;
  }

  Probe probe(double lambda) {
    const double lam[1] = {lambda};
    auto sol = solve(lam);
    if (!sol) throw Error(Errc::InfeasibleRelaxation, "no proper policy");
    return Probe{lambda, std::move(*sol)};
  }

  std::size_t solves = 0;
  std::optional<Candidate> best_feasible;

 private:
  WeightedSspSolver solver_;
  std::vector<double> warm_;
};

bool at_least(double value, double target) { return value >= target - kTieTolerance * scale_of(target); }

DualState finish(DualSearch& search, std::vector<double> lambda, WeightedSolution sol) {
  DualState out;
  out.lambda_star = std::move(lambda);
  out.dual_value = sol.scalarized;
  out.best_dual = Candidate{sol.policy, sol.value, sol.scalarized};
  out.cost_to_go = std::move(sol.cost_to_go);
  out.best_feasible = search.best_feasible;
  if (out.best_feasible) {
    out.best_feasible->lagrangian =
        lagrangian(out.best_feasible->value.f, out.best_feasible->value.g, out.lambda_star);
  }
  out.solves = search.solves;
  return out;
}

DualState single_constraint(DualSearch& search, Probe p0, const DualConfig& config) {
  const double tol = kFeasibilityTolerance;
  if (p0.g() <= tol) return finish(search, {0.0}, std::move(p0.sol));

  std::optional<Probe> lo = std::move(p0), hi, flat;
  for (double lam = 1.0;; lam = std::min(lam * 2.0, config.lambda_cap)) {
    Probe p = search.probe(lam);
    if (p.g() < -tol) {
      hi = std::move(p);
      break;
    }
    if (p.g() <= tol) {
      flat = std::move(p);
      break;
    }
    if (lam >= config.lambda_cap) return finish(search, {lam}, std::move(p.sol));
    lo = std::move(p);
  }

  for (std::size_t it = 0; !flat && it < config.max_line_search_iterations; ++it) {
    double lam = (hi->f() - lo->f()) / (lo->g() - hi->g());
    lam = std::clamp(lam, lo->lambda, hi->lambda);
    Probe p = search.probe(lam);
    const double line = lo->f() + lam * lo->g();
    if (at_least(p.sol.scalarized, line)) return finish(search, {lam}, std::move(p.sol));
    if (p.g() > tol) {
      lo = std::move(p);
    } else if (p.g() < -tol) {
      hi = std::move(p);
    } else {
      flat = std::move(p);
    }
  }
  if (!flat) {
    // Line search budget exhausted: the better bracket end is still a valid bound.
    Probe& best = lo->sol.scalarized >= hi->sol.scalarized ? *lo : *hi;
    return finish(search, {best.lambda}, std::move(best.sol));
  }

  // Flat optimal segment: L(lambda) = f_flat on [left, right]; take its midpoint.
  const double level = flat->f();
  double left = flat->lambda;
  for (std::size_t it = 0; it < config.max_line_search_iterations; ++it) {
    const double lam = std::clamp((level - lo->f()) / lo->g(), lo->lambda, flat->lambda);
    Probe p = search.probe(lam);
    if (at_least(p.sol.scalarized, level) || p.g() <= tol) {
      left = lam;
      break;
    }
    lo = std::move(p);
  }
  double right = kInf;
  if (!hi) {
    for (double lam = std::max(1.0, flat->lambda * 2.0); lam <= config.lambda_cap; lam *= 2.0) {
      Probe p = search.probe(lam);
      if (p.g() < -tol) {
        hi = std::move(p);
        break;
      }
    }
  }
  if (hi) {
    right = hi->lambda;
    for (std::size_t it = 0; it < config.max_line_search_iterations; ++it) {
      const double lam = std::clamp((level - hi->f()) / hi->g(), flat->lambda, hi->lambda);
      Probe p = search.probe(lam);
      if (at_least(p.sol.scalarized, level) || p.g() >= -tol) {
        right = lam;
        break;
      }
      hi = std::move(p);
    }
  }
  // An unbounded segment has no midpoint; step one unit (or double) past its left end.
  const double mid = std::isfinite(right) ? 0.5 * (left + right) : left + std::max(1.0, left);
  Probe p = search.probe(std::min(mid, config.lambda_cap));
  return finish(search, {p.lambda}, std::move(p.sol));
}

DualState multi_constraint(DualSearch& search, WeightedSolution s0, const DualConfig& config,
                           std::size_t dims) {
  std::vector<double> lambda(dims, 0.0), best_lambda = lambda;
  WeightedSolution best = s0, current = std::move(s0);
  for (std::size_t k = 1; k <= config.max_supergradient_iterations; ++k) {
    if (current.scalarized > best.scalarized) {
      best = current;
      best_lambda = lambda;
    }
    bool optimal = true;
    for (std::size_t i = 0; i < dims; ++i) {
      const double gi = current.value.g[i];
      if (gi > kFeasibilityTolerance || lambda[i] * std::abs(gi) > kFeasibilityTolerance) {
        optimal = false;
      }
    }
    if (optimal) break;
    const double step = 1.0 / std::sqrt(static_cast<double>(k));
    for (std::size_t i = 0; i < dims; ++i) {
      lambda[i] = std::clamp(lambda[i] + step * current.value.g[i], 0.0, config.lambda_cap);
    }
    auto sol = search.solve(lambda);
    if (!sol) throw Error(Errc::InfeasibleRelaxation, "no proper policy");
    current = std::move(*sol);
  }
  if (current.scalarized > best.scalarized) {
    best = std::move(current);
    best_lambda = lambda;
  }
  return finish(search, std::move(best_lambda), std::move(best));
}

}  // namespace

DualState dual_ascent(const CsspModel& model, const DualConfig& config,
                      std::span<const double> heuristic) {
  DualSearch search(model, heuristic);
  const std::size_t dims = model.num_secondary();
  const std::vector<double> zero(dims, 0.0);
  auto s0 = search.solve(zero);
  if (!s0) {
    throw Error(Errc::InfeasibleRelaxation, "no proper policy exists even without constraints");
  }
  if (dims == 0) return finish(search, {}, std::move(*s0));
  if (dims == 1) return single_constraint(search, Probe{0.0, std::move(*s0)}, config);
  return multi_constraint(search, std::move(*s0), config, dims);
}

// ---------------------------------------------------------------------------
// Stage 2: next-best enumeration

PolicyEnumerator::PolicyEnumerator(const CsspModel& model, std::vector<double> lambda,
                                   std::span<const double> warm_start)
    : model_(model), lambda_(std::move(lambda)), solver_(model) {
  auto root = std::make_shared<Node>();
  root->key = -kInf;
  root->seq = next_seq_++;
  if (!warm_start.empty()) {
    root->warm = std::make_shared<const std::vector<double>>(warm_start.begin(), warm_start.end());
  }
  queue_.push(std::move(root));
}

std::vector<std::uint8_t> PolicyEnumerator::mask_for(const Node& node) const {
  std::vector<std::uint8_t> mask(model_.num_global_actions(), 1);
  for (auto [s, a] : node.forced) {
    for (std::size_t b = 0; b < model_.num_actions(s); ++b) {
      if (static_cast<int>(b) != a) mask[model_.global_action(s, static_cast<int>(b))] = 0;
    }
  }
  for (auto [s, a] : node.forbidden) mask[model_.global_action(s, a)] = 0;
  return mask;
}

bool bounds_unattainable(const WeightedSspSolver& solver, std::span<const std::uint8_t> usable) {
  const CsspModel& m = solver.model();
  for (std::size_t i = 0; i < m.num_secondary(); ++i) {
    const double bound = m.bounds()[i];
    if (!std::isfinite(bound)) continue;
    const auto least = solver.min_expected_cost(i + 1, usable);
    if (!least) return false;  // no proper policy at all; not our call
    if (*least - bound > kFeasibilityTolerance + kTieTolerance * scale_of(bound)) return true;
  }
  return false;
}

std::optional<Candidate> PolicyEnumerator::next() {
  while (!queue_.empty()) {
    std::shared_ptr<Node> node = queue_.top();
    queue_.pop();
    const std::vector<std::uint8_t> mask = mask_for(*node);
    if (!node->solution) {
      if (skip_infeasible_ && bounds_unattainable(solver_, mask)) {
        ++skipped_;
        continue;
      }
      std::span<const double> warm;
      if (node->warm) warm = *node->warm;
      auto sol = solver_.solve(lambda_, mask, warm);
      if (!sol) continue;
      node->key = sol->scalarized;
      node->seq = next_seq_++;
      node->solution = std::move(sol);
      node->warm.reset();
      queue_.push(std::move(node));
      continue;
    }

    const WeightedSolution& sol = *node->solution;
    auto warm = std::make_shared<const std::vector<double>>(sol.cost_to_go);
    std::vector<std::uint8_t> is_forced(model_.num_states(), 0);
    for (auto [s, a] : node->forced) is_forced[s] = 1;

    std::vector<std::pair<StateId, int>> prefix = node->forced;
    for (StateId s : reachable_states(model_, sol.policy)) {
      if (is_forced[s]) continue;
      const int a = sol.policy.action(s);
      std::size_t alternatives = 0;
      for (std::size_t b = 0; b < model_.num_actions(s); ++b) {
        if (static_cast<int>(b) != a && mask[model_.global_action(s, static_cast<int>(b))]) {
          ++alternatives;
        }
      }
      if (alternatives > 0) {
        auto child = std::make_shared<Node>();
        child->key = node->key;
        child->seq = next_seq_++;
        child->forced = prefix;
        child->forbidden = node->forbidden;
        child->forbidden.emplace_back(s, a);
        child->warm = warm;
        queue_.push(std::move(child));
      }
      prefix.emplace_back(s, a);
    }
    ++emitted_;
    return Candidate{sol.policy, sol.value, sol.scalarized};
  }
  return std::nullopt;
}

PolicyEnumerator stage2_enumerate(const CsspModel& model, const DualState& dual) {
  return PolicyEnumerator(model, dual.lambda_star, dual.cost_to_go);
}

// ---------------------------------------------------------------------------
// Anytime solve

AnytimeResult anytime_solve(const CsspModel& model, const AnytimeConfig& config,
                            std::span<const double> heuristic) {
  AnytimeResult result;
  DualState dual;
  try {
    dual = dual_ascent(model, config.dual, heuristic);
  } catch (const Error& e) {
    if (e.code() != Errc::InfeasibleRelaxation) throw;
    result.status = AnytimeStatus::Infeasible;
    result.lower_bound = kInf;
    result.upper_bound = kInf;
    result.trace.push_back({0, kInf, kInf, false});
    return result;
  }
  result.lambda_star = dual.lambda_star;
  result.best_dual = dual.best_dual;
  result.incumbent = dual.best_feasible;
  result.upper_bound = result.incumbent ? result.incumbent->value.f : kInf;
  result.lower_bound = std::min(dual.dual_value, result.upper_bound);
  result.trace.push_back({0, result.lower_bound, result.upper_bound, result.incumbent.has_value()});

  auto closed = [&] {
    return std::isfinite(result.upper_bound) &&
           result.lower_bound >= result.upper_bound - kTieTolerance * scale_of(result.upper_bound);
  };
  if (closed()) {
    result.lower_bound = result.upper_bound;
    result.status = AnytimeStatus::Optimal;
    return result;
  }

  // No feasible policy seen in stage 1: try to certify that none exists.
  if (!result.incumbent && bounds_unattainable(WeightedSspSolver(model))) {
    result.status = AnytimeStatus::Infeasible;
    result.lower_bound = kInf;
    result.upper_bound = kInf;
    result.trace.push_back({0, kInf, kInf, false});
    return result;
  }

  PolicyEnumerator stream = stage2_enumerate(model, dual);
  stream.skip_infeasible_subproblems();
  bool exhausted = false;
  while (result.iterations_used < config.l) {
    std::optional<Candidate> cand = stream.next();
    if (!cand) {
      exhausted = true;
      break;
    }
    ++result.iterations_used;
    if (is_feasible(cand->value) && cand->value.f < result.upper_bound) {
      result.upper_bound = cand->value.f;
      result.incumbent = *cand;
    }
    result.lower_bound =
        std::max(result.lower_bound, std::min(cand->lagrangian, result.upper_bound));
    const bool done = closed() || cand->lagrangian >= result.upper_bound;
    if (done) result.lower_bound = result.upper_bound;
    result.trace.push_back({result.iterations_used, result.lower_bound, result.upper_bound,
                            result.incumbent.has_value()});
    if (done) break;
  }
  if (exhausted) {
    result.lower_bound = result.upper_bound;
    result.trace.push_back({result.iterations_used, result.lower_bound, result.upper_bound,
                            result.incumbent.has_value()});
  }
  if (result.incumbent) {
    result.status = result.lower_bound >= result.upper_bound ? AnytimeStatus::Optimal
                                                             : AnytimeStatus::Feasible;
  } else {
    result.status = exhausted ? AnytimeStatus::Infeasible : AnytimeStatus::Unknown;
  }
  return result;
}

void write_trace_csv(std::ostream& os, std::span<const AnytimeTraceRecord> trace) {
  os << "iter,lb,ub,feasible_found\n";
  const auto old_precision = os.precision(17);
  for (const auto& r : trace) {
    os << r.iter << ',' << r.lb << ',' << r.ub << ',' << (r.feasible_found ? 1 : 0) << '\n';
  }
  os.precision(old_precision);
}

}  // namespace hcssp
