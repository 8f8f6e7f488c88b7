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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hcssp/cssp_model.hpp"

namespace hcssp {

using EventId = std::int32_t;

/// One value of an event's choice variable and the event distribution it induces.
struct Choice {
  std::string name;
  std::vector<std::pair<EventId, double>> next;
};

struct Event {
  std::string name;
  std::vector<Choice> choices;  // empty only for the end event
};

/// A sub-SSP attached to the event edge (start_event -> end_event).
///
/// `model` carries the activity's dynamics, cost functions (primary first)
/// and goals; its bounds are +inf placeholders and its initial distribution
/// is replaced at evaluation time. `global_state` maps local state ids into
/// the shared state universe of the hierarchy.
struct Activity {
  std::string name;
  EventId start_event = 0;
  EventId end_event = 0;
  CsspModel model;
  std::vector<StateId> global_state;

  std::size_t num_secondary() const { return model.num_secondary(); }
};

/// Activity `activity` contributes its cost function `cost_index` (>= 1) to a constraint.
struct ConstraintTerm {
  int activity = 0;
  int cost_index = 1;
};

struct Constraint {
  std::vector<ConstraintTerm> terms;
  double bound = 0.0;
};

class HcsspModel {
 public:
  std::vector<std::string> states;
  Distribution initial;  // over `states`
  std::vector<Event> events;
  EventId start_event = 0;
  EventId end_event = 0;
  std::vector<Activity> activities;
  std::vector<Constraint> constraints;

  std::optional<StateId> find_state(std::string_view name) const;
  std::optional<EventId> find_event(std::string_view name) const;
  std::optional<int> find_activity(std::string_view name) const;

  /// Activity on the event edge (from, to), or -1.
  int activity_on_edge(EventId from, EventId to) const;
  /// Local id of a global state inside an activity, or -1.
  StateId local_state(int activity, StateId global) const;

  /// Rebuilds the lookup tables; call after editing the public fields.
  void index();

 private:
  std::map<std::pair<EventId, EventId>, int> edge_activity_;
  std::vector<std::map<StateId, StateId>> local_of_global_;
};

/// Choice index per event; DeterministicPolicy::kNone where unassigned.
using ProceduralPolicy = std::vector<int>;

struct HierarchicalSolution {
  ProceduralPolicy rho;
  std::map<int, DeterministicPolicy> gamma;  // activated activity -> local policy
  double objective = 0.0;
  std::vector<double> constraint_values;
  bool feasible = false;
};

/// Slack on sum L(E|rho) g^E <= Delta when declaring a solution feasible.
inline constexpr double kHierarchyFeasibilityTolerance = 1e-9;

std::vector<std::string> validate_hcssp(const HcsspModel& model);

/// Event order with every edge pointing forward. Throws CyclicGraph.
std::vector<EventId> topological_order_events(const HcsspModel& model);

/// Activities sorted so that predecessors come first. Throws CyclicGraph.
std::vector<int> topological_order(const HcsspModel& model);

/// Probability of reaching each event from the start event under rho.
/// Throws UnassignedChoice for a reachable event without a choice.
std::vector<double> event_reach(const HcsspModel& model, const ProceduralPolicy& rho);

double activity_likelihood(const HcsspModel& model, const ProceduralPolicy& rho, int activity);

/// Minimum of L(E|rho) over procedural policies that activate E.
/// Throws NeverActivated.
double min_activity_likelihood(const HcsspModel& model, int activity);

/// Restricts `mixture` (global ids) to the activity's states and renormalizes;
/// the result uses local ids. Throws EmptySupport.
Distribution restrict_to_activity(const HcsspModel& model, int activity, const Distribution& mixture);

/// Termination distribution of an activity policy, in global ids.
Distribution to_global(const HcsspModel& model, int activity, const Distribution& local);

/// Per-activity entry distributions (local ids) induced by rho and the
/// activity policies in `gamma`; empty for activities rho does not activate.
/// Throws MissingPolicy, EmptySupport.
std::vector<Distribution> chain_distributions(const HcsspModel& model, const ProceduralPolicy& rho,
                                              const std::map<int, DeterministicPolicy>& gamma);

/// Fills objective, constraint_values and feasible of `sol` from rho and gamma.
/// Throws MissingPolicy, UnassignedChoice, ImproperPolicy, EmptySupport.
void evaluate_solution(const HcsspModel& model, HierarchicalSolution& sol);

}  // namespace hcssp
