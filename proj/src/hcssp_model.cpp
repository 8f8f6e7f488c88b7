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

#include "hcssp/hcssp_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "hcssp/error.hpp"

namespace hcssp {

std::optional<StateId> HcsspModel::find_state(std::string_view name) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == name) return static_cast<StateId>(i);
  }
  return std::nullopt;
}

std::optional<EventId> HcsspModel::find_event(std::string_view name) const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].name == name) return static_cast<EventId>(i);
  }
  return std::nullopt;
}

std::optional<int> HcsspModel::find_activity(std::string_view name) const {
  for (std::size_t i = 0; i < activities.size(); ++i) {
    if (activities[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

int HcsspModel::activity_on_edge(EventId from, EventId to) const {
  auto it = edge_activity_.find({from, to});
  return it == edge_activity_.end() ? -1 : it->second;
}

StateId HcsspModel::local_state(int activity, StateId global) const {
  const auto& m = local_of_global_[activity];
  auto it = m.find(global);
  return it == m.end() ? -1 : it->second;
}

void HcsspModel::index() {
  edge_activity_.clear();
  local_of_global_.assign(activities.size(), {});
  for (std::size_t e = 0; e < activities.size(); ++e) {
    const Activity& act = activities[e];
    edge_activity_.emplace(std::make_pair(act.start_event, act.end_event), static_cast<int>(e));
    for (std::size_t s = 0; s < act.global_state.size(); ++s) {
      local_of_global_[e].emplace(act.global_state[s], static_cast<StateId>(s));
    }
  }
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

// Successor events with positive probability under any choice.
std::vector<std::vector<EventId>> event_successors(const HcsspModel& model) {
  std::vector<std::vector<EventId>> succ(model.events.size());
  for (std::size_t t = 0; t < model.events.size(); ++t) {
    for (const Choice& c : model.events[t].choices) {
      for (auto [next, p] : c.next) {
        if (p > 0.0 && next >= 0 && static_cast<std::size_t>(next) < model.events.size()) {
          succ[t].push_back(next);
        }
      }
    }
    std::sort(succ[t].begin(), succ[t].end());
    succ[t].erase(std::unique(succ[t].begin(), succ[t].end()), succ[t].end());
  }
  return succ;
}

// Kahn's algorithm, smallest id first. Returns fewer than |T| events on a cycle.
std::vector<EventId> kahn(const std::vector<std::vector<EventId>>& succ) {
  const std::size_t n = succ.size();
  std::vector<int> indeg(n, 0);
  for (const auto& out : succ) {
    for (EventId t : out) ++indeg[t];
  }
  std::set<EventId> ready;
  for (std::size_t t = 0; t < n; ++t) {
    if (indeg[t] == 0) ready.insert(static_cast<EventId>(t));
  }
  std::vector<EventId> order;
  while (!ready.empty()) {
    const EventId t = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(t);
    for (EventId u : succ[t]) {
      if (--indeg[u] == 0) ready.insert(u);
    }
  }
  return order;
}

// Some cycle as a list of event ids (first == last), empty if acyclic.
std::vector<EventId> find_cycle(const std::vector<std::vector<EventId>>& succ) {
  const std::size_t n = succ.size();
  std::vector<int> color(n, 0);
  std::vector<EventId> stack;
  std::vector<EventId> cycle;
  std::function<bool(EventId)> dfs = [&](EventId t) {
    color[t] = 1;
    stack.push_back(t);
    for (EventId u : succ[t]) {
      if (color[u] == 1) {
        auto it = std::find(stack.begin(), stack.end(), u);
        cycle.assign(it, stack.end());
        cycle.push_back(u);
        return true;
      }
      if (color[u] == 0 && dfs(u)) return true;
    }
    stack.pop_back();
    color[t] = 2;
    return false;
  };
  for (std::size_t t = 0; t < n; ++t) {
    if (color[t] == 0 && dfs(static_cast<EventId>(t))) break;
  }
  return cycle;
}

double edge_probability(const Choice& c, EventId to) {
  double p = 0.0;
  for (auto [next, q] : c.next) {
    if (next == to) p += q;
  }
  return p;
}

void accumulate(std::map<StateId, double>& into, const Distribution& dist, double weight) {
  if (weight <= 0.0) return;
  for (auto [s, p] : dist) into[s] += weight * p;
}

}  // namespace

std::vector<std::string> validate_hcssp(const HcsspModel& model) {
  std::vector<std::string> issues;
  const std::size_t num_events = model.events.size();
  auto valid_event = [&](EventId t) { return t >= 0 && static_cast<std::size_t>(t) < num_events; };

  double mass = 0.0;
  for (auto [s, p] : model.initial) {
    if (s < 0 || static_cast<std::size_t>(s) >= model.states.size()) {
      issues.emplace_back("initial distribution names an unknown state");
    }
    if (!(p >= 0.0)) issues.emplace_back("initial distribution has a negative probability");
    mass += p;
  }
  if (std::abs(mass - 1.0) > kRowSumTolerance) {
    issues.push_back("initial distribution sums to " + fmt(mass) + ", not 1");
  }
  if (!valid_event(model.start_event)) issues.emplace_back("start event is not a known event");
  if (!valid_event(model.end_event)) issues.emplace_back("end event is not a known event");
  if (!issues.empty() && (!valid_event(model.start_event) || !valid_event(model.end_event))) {
    return issues;
  }
  if (model.start_event == model.end_event) issues.emplace_back("start and end event coincide");

  for (std::size_t t = 0; t < num_events; ++t) {
    const Event& ev = model.events[t];
    if (static_cast<EventId>(t) == model.end_event) {
      if (!ev.choices.empty()) issues.push_back("end event '" + ev.name + "' must not have choices");
      continue;
    }
    if (ev.choices.empty()) {
      issues.push_back("event '" + ev.name + "' has no choice variable domain");
    }
    for (const Choice& c : ev.choices) {
      const std::string where = "(event '" + ev.name + "', choice '" + c.name + "')";
      double row = 0.0;
      for (auto [next, p] : c.next) {
        if (!valid_event(next)) issues.push_back("transition " + where + " targets an unknown event");
        if (!(p >= 0.0)) issues.push_back("negative event transition probability at " + where);
        row += p;
      }
      if (std::abs(row - 1.0) > kRowSumTolerance) {
        issues.push_back("event transition row " + where + " sums to " + fmt(row) + ", not 1");
      }
    }
  }

  const auto succ = event_successors(model);
  if (auto cycle = find_cycle(succ); !cycle.empty()) {
    std::string text = "event graph has a cycle: ";
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      if (i) text += " -> ";
      text += model.events[cycle[i]].name;
    }
    issues.push_back(text);
  }

  std::set<std::pair<EventId, EventId>> edges;
  for (const Activity& act : model.activities) {
    const std::string who = "activity '" + act.name + "'";
    if (!valid_event(act.start_event) || !valid_event(act.end_event)) {
      issues.push_back(who + " refers to an unknown event");
      continue;
    }
    bool realizable = false;
    for (const Choice& c : model.events[act.start_event].choices) {
      if (edge_probability(c, act.end_event) > 0.0) realizable = true;
    }
    if (!realizable) {
      issues.push_back(who + " sits on edge '" + model.events[act.start_event].name + "' -> '" +
                       model.events[act.end_event].name + "', which no transition realizes");
    }
    if (!edges.insert({act.start_event, act.end_event}).second) {
      issues.push_back(who + " shares its event edge with another activity");
    }
    if (act.global_state.size() != act.model.num_states()) {
      issues.push_back(who + " has a state map of the wrong size");
    } else {
      for (StateId g : act.global_state) {
        if (g < 0 || static_cast<std::size_t>(g) >= model.states.size()) {
          issues.push_back(who + " maps a state outside the state universe");
          break;
        }
      }
    }
    if (act.model.goals().empty()) {
      issues.push_back(who + " has no goal states");
      continue;
    }
    const CsspModel probe = act.model.with_initial({{act.model.goals()[0], 1.0}});
    for (const std::string& issue : validate_model(probe)) issues.push_back(who + ": " + issue);
  }

  std::set<std::pair<int, int>> used;
  for (std::size_t j = 0; j < model.constraints.size(); ++j) {
    const Constraint& con = model.constraints[j];
    const std::string who = "constraint " + std::to_string(j);
    if (!(con.bound >= 0.0)) issues.push_back(who + " has a negative bound");
    for (const ConstraintTerm& term : con.terms) {
      if (term.activity < 0 || static_cast<std::size_t>(term.activity) >= model.activities.size()) {
        issues.push_back(who + " names an unknown activity");
        continue;
      }
      const Activity& act = model.activities[term.activity];
      if (term.cost_index < 1 || static_cast<std::size_t>(term.cost_index) > act.num_secondary()) {
        issues.push_back(who + " uses cost index " + std::to_string(term.cost_index) +
                         " which activity '" + act.name + "' does not define");
        continue;
      }
      if (!used.insert({term.activity, term.cost_index}).second) {
        issues.push_back("cost function C_" + std::to_string(term.cost_index) + " of activity '" +
                         act.name + "' appears in more than one constraint");
      }
    }
  }
  return issues;
}

std::vector<EventId> topological_order_events(const HcsspModel& model) {
  const auto succ = event_successors(model);
  auto order = kahn(succ);
  if (order.size() != model.events.size()) {
    throw Error(Errc::CyclicGraph, "event graph is cyclic");
  }
  return order;
}

std::vector<int> topological_order(const HcsspModel& model) {
  const auto events = topological_order_events(model);
  std::vector<std::size_t> position(model.events.size());
  for (std::size_t i = 0; i < events.size(); ++i) position[events[i]] = i;
  std::vector<int> order(model.activities.size());
  for (std::size_t e = 0; e < order.size(); ++e) order[e] = static_cast<int>(e);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return position[model.activities[a].start_event] < position[model.activities[b].start_event];
  });
  return order;
}

std::vector<double> event_reach(const HcsspModel& model, const ProceduralPolicy& rho) {
  const auto order = topological_order_events(model);
  std::vector<double> reach(model.events.size(), 0.0);
  reach[model.start_event] = 1.0;
  for (EventId t : order) {
    if (reach[t] <= 0.0 || t == model.end_event) continue;
    const Event& ev = model.events[t];
    const int c = static_cast<std::size_t>(t) < rho.size() ? rho[t] : DeterministicPolicy::kNone;
    if (c < 0 || static_cast<std::size_t>(c) >= ev.choices.size()) {
      throw Error(Errc::UnassignedChoice, "no choice assigned at reachable event '" + ev.name + "'");
    }
    for (auto [next, p] : ev.choices[c].next) reach[next] += reach[t] * p;
  }
  return reach;
}

double activity_likelihood(const HcsspModel& model, const ProceduralPolicy& rho, int activity) {
  const Activity& act = model.activities[activity];
  const auto reach = event_reach(model, rho);
  if (reach[act.start_event] <= 0.0) return 0.0;
  const Choice& c = model.events[act.start_event].choices[rho[act.start_event]];
  return reach[act.start_event] * edge_probability(c, act.end_event);
}

double min_activity_likelihood(const HcsspModel& model, int activity) {
  const Activity& act = model.activities[activity];
  const auto order = topological_order_events(model);

  // Events that can lead to the activity's start event.
  std::vector<std::uint8_t> ancestor(model.events.size(), 0);
  ancestor[act.start_event] = 1;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    for (const Choice& c : model.events[*it].choices) {
      for (auto [next, p] : c.next) {
        if (p > 0.0 && ancestor[next]) ancestor[*it] = 1;
      }
    }
  }

  double best = kInf;
  std::function<void(std::size_t, std::vector<double>)> walk = [&](std::size_t i,
                                                                    std::vector<double> reach) {
    for (; i < order.size(); ++i) {
      const EventId t = order[i];
      if (!ancestor[t] || reach[t] <= 0.0) continue;
      const auto& choices = model.events[t].choices;
      if (t == act.start_event) {
        for (const Choice& c : choices) {
          const double l = reach[t] * edge_probability(c, act.end_event);
          if (l > 0.0) best = std::min(best, l);
        }
        return;
      }
      if (choices.size() == 1) {
        for (auto [next, p] : choices[0].next) reach[next] += reach[t] * p;
        continue;
      }
      for (const Choice& c : choices) {
        std::vector<double> branch = reach;
        for (auto [next, p] : c.next) branch[next] += reach[t] * p;
        walk(i + 1, std::move(branch));
      }
      return;
    }
  };
  std::vector<double> reach(model.events.size(), 0.0);
  reach[model.start_event] = 1.0;
  walk(0, std::move(reach));
  if (!std::isfinite(best)) {
    throw Error(Errc::NeverActivated, "no procedural policy activates activity '" + act.name + "'");
  }
  return best;
}

Distribution restrict_to_activity(const HcsspModel& model, int activity, const Distribution& mixture) {
  Distribution local;
  double mass = 0.0;
  for (auto [g, p] : mixture) {
    if (p <= 0.0) continue;
    const StateId s = model.local_state(activity, g);
    if (s < 0) continue;
    local.emplace_back(s, p);
    mass += p;
  }
  if (mass <= 0.0) {
    throw Error(Errc::EmptySupport, "no entry mass inside activity '" + model.activities[activity].name + "'");
  }
  for (auto& [s, p] : local) p /= mass;
  std::sort(local.begin(), local.end());
  return local;
}

Distribution to_global(const HcsspModel& model, int activity, const Distribution& local) {
  const Activity& act = model.activities[activity];
  Distribution out;
  out.reserve(local.size());
  for (auto [s, p] : local) out.emplace_back(act.global_state[s], p);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct Propagation {
  std::vector<double> reach;
  std::vector<Distribution> entry;      // per activity, local ids
  std::vector<PolicyValue> value;       // per activity
  std::vector<double> likelihood;       // per activity
};

Propagation propagate(const HcsspModel& model, const ProceduralPolicy& rho,
                      const std::map<int, DeterministicPolicy>& gamma) {
  const auto order = topological_order_events(model);
  Propagation out;
  out.reach = event_reach(model, rho);
  out.entry.resize(model.activities.size());
  out.value.resize(model.activities.size());
  out.likelihood.assign(model.activities.size(), 0.0);

  std::vector<std::map<StateId, double>> incoming(model.events.size());
  accumulate(incoming[model.start_event], model.initial, 1.0);

  for (EventId t : order) {
    const double reach = out.reach[t];
    if (reach <= 0.0 || t == model.end_event) continue;
    Distribution here;
    for (auto [s, w] : incoming[t]) here.emplace_back(s, w / reach);
    const Choice& c = model.events[t].choices[rho[t]];
    for (auto [next, p] : c.next) {
      const double flow = reach * p;
      if (flow <= 0.0) continue;
      const int e = model.activity_on_edge(t, next);
      if (e < 0) {
        accumulate(incoming[next], here, flow);
        continue;
      }
      auto it = gamma.find(e);
      if (it == gamma.end()) {
        throw Error(Errc::MissingPolicy, "activated activity '" + model.activities[e].name +
                                             "' has no policy");
      }
      out.likelihood[e] += flow;
      out.entry[e] = restrict_to_activity(model, e, here);
      const CsspModel m = model.activities[e].model.with_initial(out.entry[e]);
      out.value[e] = evaluate_policy(m, it->second);
      accumulate(incoming[next], to_global(model, e, out.value[e].termination), flow);
    }
  }
  return out;
}

}  // namespace

std::vector<Distribution> chain_distributions(const HcsspModel& model, const ProceduralPolicy& rho,
                                              const std::map<int, DeterministicPolicy>& gamma) {
  return propagate(model, rho, gamma).entry;
}

void evaluate_solution(const HcsspModel& model, HierarchicalSolution& sol) {
  const Propagation p = propagate(model, sol.rho, sol.gamma);
  sol.objective = 0.0;
  for (std::size_t e = 0; e < model.activities.size(); ++e) {
    if (p.likelihood[e] > 0.0) sol.objective += p.likelihood[e] * p.value[e].f;
  }
  sol.constraint_values.assign(model.constraints.size(), 0.0);
  sol.feasible = true;
  for (std::size_t j = 0; j < model.constraints.size(); ++j) {
    double total = 0.0;
    for (const ConstraintTerm& term : model.constraints[j].terms) {
      const double l = p.likelihood[term.activity];
      if (l > 0.0) total += l * p.value[term.activity].raw_g[term.cost_index - 1];
    }
    sol.constraint_values[j] = total;
    if (total > model.constraints[j].bound + kHierarchyFeasibilityTolerance) sol.feasible = false;
  }
}

}  // namespace hcssp
