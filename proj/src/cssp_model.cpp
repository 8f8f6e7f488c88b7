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

#include "hcssp/cssp_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "hcssp/error.hpp"
#include "hcssp/kernels.hpp"

namespace hcssp {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidModel: return "InvalidModel";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::UnassignedState: return "UnassignedState";
    case Errc::ImproperPolicy: return "ImproperPolicy";
    case Errc::NoProperPolicy: return "NoProperPolicy";
    case Errc::InfeasibleRelaxation: return "InfeasibleRelaxation";
    case Errc::UnassignedChoice: return "UnassignedChoice";
    case Errc::NeverActivated: return "NeverActivated";
    case Errc::CyclicGraph: return "CyclicGraph";
    case Errc::MissingPolicy: return "MissingPolicy";
    case Errc::MissingEstimate: return "MissingEstimate";
    case Errc::EmptySupport: return "EmptySupport";
    case Errc::SupportOutsideActivity: return "SupportOutsideActivity";
    case Errc::DegeneratePartition: return "DegeneratePartition";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::TooLarge: return "TooLarge";
    case Errc::Parse: return "Parse";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// CsspModel

std::optional<StateId> CsspModel::find_state(std::string_view name) const {
  auto it = state_index_.find(name);
  if (it == state_index_.end()) return std::nullopt;
  return it->second;
}

Distribution CsspModel::initial_support() const {
  Distribution out;
  for (std::size_t s = 0; s < initial_.size(); ++s) {
    if (initial_[s] > 0.0) out.emplace_back(static_cast<StateId>(s), initial_[s]);
  }
  return out;
}

std::optional<int> CsspModel::find_action(StateId s, std::string_view name) const {
  for (std::size_t a = 0; a < num_actions(s); ++a) {
    if (action_names_[action_begin_[s] + a] == name) return static_cast<int>(a);
  }
  return std::nullopt;
}

std::span<const Outcome> CsspModel::outcomes(StateId s, int a) const {
  const std::size_t ga = global_action(s, a);
  return std::span<const Outcome>(outcomes_).subspan(outcome_begin_[ga],
                                                     outcome_begin_[ga + 1] - outcome_begin_[ga]);
}

std::span<const double> CsspModel::costs(std::size_t index, StateId s, int a) const {
  const std::size_t ga = global_action(s, a);
  return std::span<const double>(costs_[index]).subspan(outcome_begin_[ga],
                                                        outcome_begin_[ga + 1] - outcome_begin_[ga]);
}

std::vector<double> CsspModel::expected_costs(std::size_t index) const {
  std::vector<double> out(num_global_actions(), 0.0);
  const auto& table = costs_[index];
  for (std::size_t a = 0; a < out.size(); ++a) {
    double acc = 0.0;
    for (std::size_t o = outcome_begin_[a]; o < outcome_begin_[a + 1]; ++o) {
      acc += outcomes_[o].prob * table[o];
    }
    out[a] = acc;
  }
  return out;
}

CsspModel CsspModel::with_bounds(std::vector<double> bounds) const {
  if (bounds.size() != bounds_.size()) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(bounds_.size()) + " bounds");
  }
  CsspModel out = *this;
  out.bounds_ = std::move(bounds);
  return out;
}

CsspModel CsspModel::with_initial(const Distribution& initial) const {
  CsspModel out = *this;
  std::fill(out.initial_.begin(), out.initial_.end(), 0.0);
  for (auto [s, p] : initial) out.initial_.at(s) += p;
  return out;
}

CsspModel CsspModel::with_costs(std::vector<std::vector<double>> costs,
                                std::vector<double> bounds) const {
  if (costs.empty() || costs.size() != bounds.size() + 1) {
    throw Error(Errc::DimensionMismatch, "cost tables must number bounds + 1");
  }
  for (const auto& table : costs) {
    if (table.size() != outcomes_.size()) {
      throw Error(Errc::DimensionMismatch, "cost table size differs from outcome count");
    }
  }
  CsspModel out = *this;
  out.costs_ = std::move(costs);
  out.bounds_ = std::move(bounds);
  return out;
}

// ---------------------------------------------------------------------------
// CsspBuilder

StateId CsspBuilder::add_state(std::string name) {
  if (index_.count(name)) throw Error(Errc::InvalidModel, "duplicate state '" + name + "'");
  const auto id = static_cast<StateId>(names_.size());
  index_.emplace(name, id);
  names_.push_back(std::move(name));
  return id;
}

StateId CsspBuilder::state(std::string_view name) {
  if (auto found = find_state(name)) return *found;
  return add_state(std::string(name));
}

std::optional<StateId> CsspBuilder::find_state(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void CsspBuilder::set_initial(StateId s, double prob) { initial_[s] = prob; }

void CsspBuilder::add_goal(StateId s) {
  if (std::find(goals_.begin(), goals_.end(), s) == goals_.end()) goals_.push_back(s);
}

void CsspBuilder::add_action(StateId s, std::string name, std::vector<OutcomeSpec> outcomes) {
  actions_.push_back({s, std::move(name), std::move(outcomes)});
}

void CsspBuilder::set_bounds(std::vector<double> bounds) {
  if (bounds.size() != num_secondary_) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(num_secondary_) +
                                             " bounds, got " + std::to_string(bounds.size()));
  }
  bounds_ = std::move(bounds);
  bounds_set_ = true;
}

CsspModel CsspBuilder::build() const {
  const std::size_t n = names_.size();
  auto check_id = [&](StateId s, const char* what) {
    if (s < 0 || static_cast<std::size_t>(s) >= n) {
      throw Error(Errc::InvalidModel, std::string(what) + " refers to unknown state id " +
                                          std::to_string(s));
    }
  };
  if (goals_.empty()) throw Error(Errc::InvalidModel, "model has no goal states");
  if (!bounds_set_ && num_secondary_ > 0) {
    throw Error(Errc::InvalidModel, "bounds not set for secondary costs");
  }

  CsspModel m;
  m.state_names_ = names_;
  m.state_index_ = index_;
  m.initial_.assign(n, 0.0);
  for (auto [s, p] : initial_) {
    check_id(s, "initial distribution");
    m.initial_[s] = p;
  }
  m.is_goal_.assign(n, 0);
  for (StateId g : goals_) {
    check_id(g, "goal");
    m.is_goal_[g] = 1;
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (m.is_goal_[s]) m.goals_.push_back(static_cast<StateId>(s));
  }

  // Stable bucket of actions by state; goal actions are dropped (goals absorb).
  std::vector<std::vector<const PendingAction*>> by_state(n);
  for (const auto& act : actions_) {
    check_id(act.state, "action");
    if (m.is_goal_[act.state]) continue;
    by_state[act.state].push_back(&act);
  }

  m.costs_.assign(num_secondary_ + 1, {});
  m.action_begin_.reserve(n + 1);
  m.action_begin_.push_back(0);
  m.outcome_begin_.push_back(0);
  for (std::size_t s = 0; s < n; ++s) {
    for (const PendingAction* act : by_state[s]) {
      m.action_names_.push_back(act->name);
      for (const auto& out : act->outcomes) {
        check_id(out.next, "transition");
        if (out.costs.size() != num_secondary_ + 1) {
          throw Error(Errc::DimensionMismatch,
                      "outcome of action '" + act->name + "' at state '" + names_[s] + "' has " +
                          std::to_string(out.costs.size()) + " costs, expected " +
                          std::to_string(num_secondary_ + 1));
        }
        m.outcomes_.push_back({out.next, out.prob});
        for (std::size_t i = 0; i <= num_secondary_; ++i) m.costs_[i].push_back(out.costs[i]);
      }
      m.outcome_begin_.push_back(m.outcomes_.size());
    }
    m.action_begin_.push_back(m.action_names_.size());
  }
  m.bounds_ = bounds_;
  return m;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

// Cycle among non-goal states using only positive-probability outcomes with
// zero primary cost. Returns a state on such a cycle.
std::optional<StateId> find_zero_cost_cycle(const CsspModel& model) {
  const std::size_t n = model.num_states();
  std::vector<std::vector<StateId>> adj(n);
  const auto c0 = model.cost_table(0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto sid = static_cast<StateId>(s);
    for (std::size_t a = 0; a < model.num_actions(sid); ++a) {
      const std::size_t ga = model.global_action(sid, static_cast<int>(a));
      for (std::size_t o = model.outcome_begin(ga); o < model.outcome_end(ga); ++o) {
        const Outcome& out = model.all_outcomes()[o];
        if (out.prob > 0.0 && c0[o] == 0.0 && !model.is_goal(out.next)) {
          adj[s].push_back(out.next);
        }
      }
    }
  }
  // Iterative three-colour DFS.
  std::vector<std::uint8_t> colour(n, 0);
  for (std::size_t root = 0; root < n; ++root) {
    if (colour[root]) continue;
    std::vector<std::pair<StateId, std::size_t>> stack{{static_cast<StateId>(root), 0}};
    colour[root] = 1;
    while (!stack.empty()) {
      auto& [s, next] = stack.back();
      if (next < adj[s].size()) {
        const StateId t = adj[s][next++];
        if (colour[t] == 1) return t;
        if (colour[t] == 0) {
          colour[t] = 1;
          stack.emplace_back(t, 0);
        }
      } else {
        colour[s] = 2;
        stack.pop_back();
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::string> validate_model(const CsspModel& model) {
  std::vector<std::string> issues;
  const std::size_t n = model.num_states();

  double init_mass = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double p = model.initial()[s];
    if (!(p >= 0.0)) {
      issues.push_back("initial probability of state '" + model.state_name(static_cast<StateId>(s)) +
                       "' is negative");
    }
    init_mass += p;
  }
  if (std::abs(init_mass - 1.0) > kRowSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "initial distribution sums to " << init_mass << ", not 1";
    issues.push_back(os.str());
  }
  if (model.goals().empty()) issues.emplace_back("model has no goal states");

  for (std::size_t s = 0; s < n; ++s) {
    const auto sid = static_cast<StateId>(s);
    if (model.is_goal(sid)) continue;
    if (model.num_actions(sid) == 0) {
      issues.push_back("non-goal state '" + model.state_name(sid) + "' has no actions");
    }
    for (std::size_t a = 0; a < model.num_actions(sid); ++a) {
      const int ai = static_cast<int>(a);
      const std::string where =
          "(state '" + model.state_name(sid) + "', action '" + model.action_name(sid, ai) + "')";
      double row = 0.0;
      bool negative_prob = false;
      for (const Outcome& out : model.outcomes(sid, ai)) {
        row += out.prob;
        if (!(out.prob >= 0.0)) negative_prob = true;
      }
      if (negative_prob) issues.push_back("negative transition probability at " + where);
      if (std::abs(row - 1.0) > kRowSumTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "transition row " << where << " sums to " << row << ", not 1";
        issues.push_back(os.str());
      }
      for (std::size_t i = 0; i < model.num_cost_functions(); ++i) {
        for (double c : model.costs(i, sid, ai)) {
          if (!(c >= 0.0) || !std::isfinite(c)) {
            issues.push_back("cost C_" + std::to_string(i) + " at " + where +
                             " violates nonnegativity (must be finite and >= 0)");
            break;
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < model.num_secondary(); ++i) {
    if (!(model.bounds()[i] >= 0.0)) {
      issues.push_back("bound Delta_" + std::to_string(i + 1) + " is negative or NaN");
    }
  }
  if (auto s = find_zero_cost_cycle(model)) {
    issues.push_back("cycle with zero primary cost through non-goal state '" +
                     model.state_name(*s) + "'");
  }
  return issues;
}

// ---------------------------------------------------------------------------
// Policy evaluation

std::vector<StateId> reachable_states(const CsspModel& model, const DeterministicPolicy& policy) {
  const std::size_t n = model.num_states();
  if (policy.size() != n) {
    throw Error(Errc::DimensionMismatch, "policy covers " + std::to_string(policy.size()) +
                                             " states, model has " + std::to_string(n));
  }
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<StateId> order;
  for (std::size_t s = 0; s < n; ++s) {
    if (model.initial()[s] > 0.0 && !model.is_goal(static_cast<StateId>(s))) {
      seen[s] = 1;
      order.push_back(static_cast<StateId>(s));
    }
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    const StateId s = order[head];
    const int a = policy.action(s);
    if (a < 0 || static_cast<std::size_t>(a) >= model.num_actions(s)) {
      throw Error(Errc::UnassignedState, "reachable state '" + model.state_name(s) +
                                             "' has no valid action");
    }
    for (const Outcome& out : model.outcomes(s, a)) {
      if (out.prob > 0.0 && !seen[out.next] && !model.is_goal(out.next)) {
        seen[out.next] = 1;
        order.push_back(out.next);
      }
    }
  }
  return order;
}

DeterministicPolicy restrict_to_reachable(const CsspModel& model,
                                          const DeterministicPolicy& policy) {
  DeterministicPolicy out(model.num_states());
  for (StateId s : reachable_states(model, policy)) out.set(s, policy.action(s));
  return out;
}

namespace {

constexpr std::size_t kDenseLimit = 200;
constexpr double kSolveResidual = 1e-9;
constexpr std::size_t kMaxSweeps = 1'000'000;
constexpr double kGoalMassTolerance = 1e-6;

// Occupancy x over `order` (transient reachable states) solving
// x = mu0 + P^T x, by a direct solve.
std::vector<double> occupancy_direct(const CsspModel& model, const DeterministicPolicy& policy,
                                     std::span<const StateId> order,
                                     std::span<const int> local) {
  const std::size_t m = order.size();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(m * 4);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const StateId s = order[i];
    rhs[static_cast<Eigen::Index>(i)] = model.initial()[s];
    trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
    for (const Outcome& out : model.outcomes(s, policy.action(s))) {
      if (out.prob <= 0.0 || model.is_goal(out.next)) continue;
      // (I - P^T)[j][i] -= P[i][j]
      trips.emplace_back(local[out.next], static_cast<int>(i), -out.prob);
    }
  }
  Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  A.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXd x;
  auto refine = [&](auto&& solve) {
    x = solve(rhs);
    for (int it = 0; it < 3; ++it) {
      Eigen::VectorXd r = rhs - A * x;
      if (r.lpNorm<Eigen::Infinity>() <= kSolveResidual) break;
      x += solve(r);
    }
  };
  if (m <= kDenseLimit) {
    Eigen::MatrixXd dense(A);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense);
    refine([&](const Eigen::VectorXd& b) -> Eigen::VectorXd { return lu.solve(b); });
  } else {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) {
      throw Error(Errc::ImproperPolicy, "occupancy system is singular");
    }
    refine([&](const Eigen::VectorXd& b) -> Eigen::VectorXd { return lu.solve(b); });
  }
  const double residual = (rhs - A * x).lpNorm<Eigen::Infinity>();
  if (!std::isfinite(residual) || residual > kSolveResidual * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
    throw Error(Errc::ImproperPolicy, "occupancy system did not solve to tolerance");
  }
  return std::vector<double>(x.data(), x.data() + m);
}

std::vector<double> occupancy_iterative(const CsspModel& model, const DeterministicPolicy& policy,
                                        std::span<const StateId> order,
                                        std::span<const int> local) {
  const std::size_t m = order.size();
  std::vector<std::size_t> count(m + 1, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (const Outcome& out : model.outcomes(order[i], policy.action(order[i]))) {
      if (out.prob > 0.0 && !model.is_goal(out.next)) ++count[local[out.next] + 1];
    }
  }
  std::partial_sum(count.begin(), count.end(), count.begin());
  std::vector<std::int32_t> from(count.back());
  std::vector<double> prob(count.back());
  std::vector<std::size_t> fill(count.begin(), count.end() - 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (const Outcome& out : model.outcomes(order[i], policy.action(order[i]))) {
      if (out.prob > 0.0 && !model.is_goal(out.next)) {
        const std::size_t slot = fill[local[out.next]]++;
        from[slot] = static_cast<std::int32_t>(i);
        prob[slot] = out.prob;
      }
    }
  }
  kernels::ChainView chain{count, from, prob};
  std::vector<double> mu0(m);
  for (std::size_t i = 0; i < m; ++i) mu0[i] = model.initial()[order[i]];
  std::vector<double> x = mu0, next(m);
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const double delta = kernels::occupancy_sweep(chain, mu0, x, next);
    x.swap(next);
    const double scale = std::max(1.0, *std::max_element(x.begin(), x.end()));
    if (delta <= 1e-13 * scale) return x;
    if (!std::isfinite(delta)) break;
  }
  throw Error(Errc::ImproperPolicy, "occupancy iteration did not contract");
}

}  // namespace

PolicyValue evaluate_policy(const CsspModel& model, const DeterministicPolicy& policy) {
  const std::vector<StateId> order = reachable_states(model, policy);
  const std::size_t n = model.num_states();
  std::vector<int> local(n, -1);
  for (std::size_t i = 0; i < order.size(); ++i) local[order[i]] = static_cast<int>(i);

  // Goal must be reachable from every reachable state of the induced chain.
  {
    std::vector<std::vector<int>> preds(order.size());
    std::vector<std::uint8_t> reaches(order.size(), 0);
    std::deque<int> frontier;
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (const Outcome& out : model.outcomes(order[i], policy.action(order[i]))) {
        if (out.prob <= 0.0) continue;
        if (model.is_goal(out.next)) {
          if (!reaches[i]) {
            reaches[i] = 1;
            frontier.push_back(static_cast<int>(i));
          }
        } else {
          preds[local[out.next]].push_back(static_cast<int>(i));
        }
      }
    }
    while (!frontier.empty()) {
      const int j = frontier.front();
      frontier.pop_front();
      for (int p : preds[j]) {
        if (!reaches[p]) {
          reaches[p] = 1;
          frontier.push_back(p);
        }
      }
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (!reaches[i]) {
        throw Error(Errc::ImproperPolicy,
                    "goal unreachable from state '" + model.state_name(order[i]) + "'");
      }
    }
  }

  std::vector<double> x = order.size() <= kDirectSolveLimit
                              ? occupancy_direct(model, policy, order, local)
                              : occupancy_iterative(model, policy, order, local);

  PolicyValue value;
  const std::size_t num_costs = model.num_cost_functions();
  std::vector<double> totals(num_costs, 0.0);
  std::vector<double> absorbed(n, 0.0);
  for (StateId gl : model.goals()) absorbed[gl] += model.initial()[gl];
  for (std::size_t i = 0; i < order.size(); ++i) {
    const StateId s = order[i];
    const int a = policy.action(s);
    const std::size_t ga = model.global_action(s, a);
    for (std::size_t o = model.outcome_begin(ga); o < model.outcome_end(ga); ++o) {
      const Outcome& out = model.all_outcomes()[o];
      const double mass = x[i] * out.prob;
      for (std::size_t c = 0; c < num_costs; ++c) totals[c] += mass * model.cost_table(c)[o];
      if (model.is_goal(out.next)) absorbed[out.next] += mass;
    }
  }
  double goal_mass = 0.0;
  for (StateId gl : model.goals()) {
    goal_mass += absorbed[gl];
    if (absorbed[gl] > 0.0) value.termination.emplace_back(gl, absorbed[gl]);
  }
  if (goal_mass < 1.0 - kGoalMassTolerance) {
    throw Error(Errc::ImproperPolicy, "goal absorption mass " + std::to_string(goal_mass) + " < 1");
  }
  value.f = totals[0];
  value.raw_g.assign(totals.begin() + 1, totals.end());
  value.g.resize(value.raw_g.size());
  for (std::size_t i = 0; i < value.raw_g.size(); ++i) {
    value.g[i] = value.raw_g[i] - model.bounds()[i];
  }
  return value;
}

// ---------------------------------------------------------------------------
// Scalarization

double lagrangian(double f, std::span<const double> g, std::span<const double> lambda) {
  double acc = f;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (lambda[i] != 0.0) acc += lambda[i] * g[i];
  }
  return acc;
}

ScalarizedSsp scalarize(const CsspModel& model, std::span<const double> lambda) {
  if (lambda.size() != model.num_secondary()) {
    throw Error(Errc::DimensionMismatch, "lambda has " + std::to_string(lambda.size()) +
                                             " entries, model has " +
                                             std::to_string(model.num_secondary()) +
                                             " secondary costs");
  }
  std::vector<double> cost(model.cost_table(0).begin(), model.cost_table(0).end());
  double offset = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < 0.0) throw Error(Errc::InvalidModel, "lambda must be nonnegative");
    if (lambda[i] == 0.0) continue;
    const auto table = model.cost_table(i + 1);
    for (std::size_t o = 0; o < cost.size(); ++o) cost[o] += lambda[i] * table[o];
    offset -= lambda[i] * model.bounds()[i];
  }
  std::vector<std::vector<double>> tables;
  tables.push_back(std::move(cost));
  return {model.with_costs(std::move(tables), {}), offset};
}

}  // namespace hcssp
