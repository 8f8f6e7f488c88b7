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

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hcssp {

using StateId = std::int32_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kRowSumTolerance = 1e-9;

struct Outcome {
  StateId next;
  double prob;
};

/// Sparse probability distribution over state ids, sorted by id.
using Distribution = std::vector<std::pair<StateId, double>>;

/// Explicit finite C-SSP. Immutable once built; goal states carry no actions.
///
/// Storage is CSR-like: the actions of state s are the global indices
/// [action_begin(s), action_begin(s+1)), and the outcomes of global action a
/// are [outcome_begin(a), outcome_begin(a+1)). Cost tables are indexed by
/// global outcome, index 0 being the primary cost.
class CsspModel {
 public:
  CsspModel() = default;

  std::size_t num_states() const { return state_names_.size(); }
  std::size_t num_secondary() const { return bounds_.size(); }
  std::size_t num_cost_functions() const { return costs_.size(); }
  std::size_t num_global_actions() const { return action_names_.size(); }
  std::size_t num_outcomes() const { return outcomes_.size(); }

  const std::string& state_name(StateId s) const { return state_names_[s]; }
  std::span<const std::string> state_names() const { return state_names_; }
  std::optional<StateId> find_state(std::string_view name) const;

  bool is_goal(StateId s) const { return is_goal_[s] != 0; }
  std::span<const StateId> goals() const { return goals_; }
  std::span<const double> initial() const { return initial_; }
  Distribution initial_support() const;

  std::size_t num_actions(StateId s) const { return action_begin_[s + 1] - action_begin_[s]; }
  std::size_t action_begin(StateId s) const { return action_begin_[s]; }
  std::size_t global_action(StateId s, int a) const { return action_begin_[s] + a; }
  const std::string& action_name(StateId s, int a) const { return action_names_[global_action(s, a)]; }
  std::optional<int> find_action(StateId s, std::string_view name) const;

  std::size_t outcome_begin(std::size_t global_action) const { return outcome_begin_[global_action]; }
  std::size_t outcome_end(std::size_t global_action) const { return outcome_begin_[global_action + 1]; }
  std::span<const Outcome> outcomes(StateId s, int a) const;
  std::span<const double> costs(std::size_t index, StateId s, int a) const;
  std::span<const double> cost_table(std::size_t index) const { return costs_[index]; }

  std::span<const Outcome> all_outcomes() const { return outcomes_; }
  std::span<const std::size_t> action_offsets() const { return action_begin_; }
  std::span<const std::size_t> outcome_offsets() const { return outcome_begin_; }

  std::span<const double> bounds() const { return bounds_; }

  /// Expected one-step cost of cost function `index` for every global action.
  std::vector<double> expected_costs(std::size_t index) const;

  CsspModel with_bounds(std::vector<double> bounds) const;
  CsspModel with_initial(const Distribution& initial) const;
  /// Same dynamics with the given cost tables (one per outcome each).
  CsspModel with_costs(std::vector<std::vector<double>> costs, std::vector<double> bounds) const;

 private:
  friend class CsspBuilder;

  std::vector<std::string> state_names_;
  std::map<std::string, StateId, std::less<>> state_index_;
  std::vector<double> initial_;
  std::vector<std::uint8_t> is_goal_;
  std::vector<StateId> goals_;
  std::vector<std::size_t> action_begin_;
  std::vector<std::string> action_names_;
  std::vector<std::size_t> outcome_begin_;
  std::vector<Outcome> outcomes_;
  std::vector<std::vector<double>> costs_;
  std::vector<double> bounds_;
};

/// Outcome as supplied to the builder: successor, probability and one cost
/// per cost function (primary first).
struct OutcomeSpec {
  StateId next;
  double prob;
  std::vector<double> costs;
};

class CsspBuilder {
 public:
  explicit CsspBuilder(std::size_t num_secondary) : num_secondary_(num_secondary) {}

  StateId add_state(std::string name);
  /// Returns the id of `name`, adding the state if it is new.
  StateId state(std::string_view name);
  std::optional<StateId> find_state(std::string_view name) const;

  void set_initial(StateId s, double prob);
  void add_goal(StateId s);
  void add_action(StateId s, std::string name, std::vector<OutcomeSpec> outcomes);
  void set_bounds(std::vector<double> bounds);

  /// Throws Error(InvalidModel) on structural problems (unknown ids, wrong
  /// cost arity, no goals). Numeric issues are left for validate_model.
  CsspModel build() const;

 private:
  struct PendingAction {
    StateId state;
    std::string name;
    std::vector<OutcomeSpec> outcomes;
  };

  std::size_t num_secondary_;
  std::vector<std::string> names_;
  std::map<std::string, StateId, std::less<>> index_;
  std::map<StateId, double> initial_;
  std::vector<StateId> goals_;
  std::vector<PendingAction> actions_;
  std::vector<double> bounds_;
  bool bounds_set_ = false;
};

/// Lists every violated model invariant; empty iff the model is valid.
std::vector<std::string> validate_model(const CsspModel& model);

/// State -> local action index; kNone where unassigned.
class DeterministicPolicy {
 public:
  static constexpr int kNone = -1;

  DeterministicPolicy() = default;
  explicit DeterministicPolicy(std::size_t num_states) : action_(num_states, kNone) {}

  int action(StateId s) const { return action_[s]; }
  void set(StateId s, int a) { action_[s] = a; }
  std::size_t size() const { return action_.size(); }
  std::span<const int> actions() const { return action_; }

  auto operator<=>(const DeterministicPolicy&) const = default;

 private:
  std::vector<int> action_;
};

struct PolicyValue {
  double f = 0.0;
  std::vector<double> g;      // raw_g - bounds
  std::vector<double> raw_g;  // expected secondary costs
  Distribution termination;   // absorption probability per goal state
};

/// Non-goal states reachable from the initial support under `policy`, in
/// breadth-first discovery order. Throws UnassignedState.
std::vector<StateId> reachable_states(const CsspModel& model, const DeterministicPolicy& policy);

/// Copy of `policy` with every state outside its reachable set unassigned.
DeterministicPolicy restrict_to_reachable(const CsspModel& model, const DeterministicPolicy& policy);

/// Exact expected accumulated costs under a proper deterministic policy.
/// Throws UnassignedState or ImproperPolicy.
PolicyValue evaluate_policy(const CsspModel& model, const DeterministicPolicy& policy);

/// Largest reachable-state count evaluated with a direct sparse solve.
inline constexpr std::size_t kDirectSolveLimit = 5000;

struct ScalarizedSsp {
  CsspModel ssp;        // single cost function C_0 + sum_i lambda_i C_i, no bounds
  double offset = 0.0;  // -lambda . Delta
};

/// Throws DimensionMismatch when lambda.size() != num_secondary().
ScalarizedSsp scalarize(const CsspModel& model, std::span<const double> lambda);

/// f + lambda . g, skipping zero multipliers (so infinite bounds stay finite).
double lagrangian(double f, std::span<const double> g, std::span<const double> lambda);

}  // namespace hcssp
