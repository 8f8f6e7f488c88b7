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

#include "hcssp/reduction.hpp"

#include <cmath>
#include <string>

#include "hcssp/error.hpp"

namespace hcssp {

ProceduralPolicy ProceduralCssp::to_procedural(const DeterministicPolicy& policy) const {
  ProceduralPolicy rho(choice_of_action.size(), DeterministicPolicy::kNone);
  for (std::size_t t = 0; t < choice_of_action.size(); ++t) {
    const int a = t < policy.size() ? policy.action(static_cast<StateId>(t)) : DeterministicPolicy::kNone;
    if (a >= 0) {
      rho[t] = choice_of_action[t][a];
    } else if (!choice_of_action[t].empty()) {
      rho[t] = choice_of_action[t].front();
    }
  }
  return rho;
}

ProceduralCssp procedural_to_cssp(const HcsspModel& model, const CostEstimates& est) {
  const std::size_t num_constraints = model.constraints.size();
  if (est.f_bar.size() != model.activities.size()) {
    throw Error(Errc::MissingEstimate, "primary estimates must cover every activity");
  }
  for (std::size_t e = 0; e < model.activities.size(); ++e) {
    if (!est.f_bar[e]) {
      throw Error(Errc::MissingEstimate, "no primary estimate for activity '" +
                                             model.activities[e].name + "'");
    }
  }
  // secondary[e] = list of (constraint, estimate) for activity e.
  std::vector<std::vector<std::pair<std::size_t, double>>> secondary(model.activities.size());
  for (std::size_t j = 0; j < num_constraints; ++j) {
    for (const ConstraintTerm& term : model.constraints[j].terms) {
      auto it = est.g_bar.find({term.activity, term.cost_index});
      if (it == est.g_bar.end()) {
        throw Error(Errc::MissingEstimate, "no estimate for cost C_" + std::to_string(term.cost_index) +
                                               " of activity '" + model.activities[term.activity].name + "'");
      }
      secondary[term.activity].emplace_back(j, it->second);
    }
  }

  CsspBuilder builder(num_constraints);
  for (const Event& ev : model.events) builder.add_state(ev.name);
  builder.set_initial(model.start_event, 1.0);
  builder.add_goal(model.end_event);
  std::vector<double> bounds;
  for (const Constraint& c : model.constraints) bounds.push_back(c.bound);
  builder.set_bounds(bounds);

  ProceduralCssp out;
  out.choice_of_action.resize(model.events.size());
  for (std::size_t t = 0; t < model.events.size(); ++t) {
    const auto tid = static_cast<EventId>(t);
    if (tid == model.end_event) continue;
    const Event& ev = model.events[t];
    for (std::size_t c = 0; c < ev.choices.size(); ++c) {
      std::vector<OutcomeSpec> outcomes;
      bool usable = true;
      for (auto [next, p] : ev.choices[c].next) {
        OutcomeSpec o{next, p, std::vector<double>(num_constraints + 1, 0.0)};
        const int e = model.activity_on_edge(tid, next);
        if (e >= 0 && p > 0.0) {
          const double f = *est.f_bar[e];
          if (!std::isfinite(f)) usable = false;
          o.costs[0] = f;
          for (auto [j, g] : secondary[e]) o.costs[j + 1] = g;
        }
        outcomes.push_back(std::move(o));
      }
      if (!usable) continue;
      builder.add_action(tid, ev.choices[c].name, std::move(outcomes));
      out.choice_of_action[t].push_back(static_cast<int>(c));
    }
  }
  out.cssp = builder.build();
  return out;
}

ActivityCssp activity_to_cssp(const HcsspModel& model, int activity, const Distribution& init,
                              const std::vector<BudgetBound>& bounds) {
  const Activity& act = model.activities[activity];
  Distribution local;
  for (auto [g, p] : init) {
    if (p <= 0.0) continue;
    const StateId s = model.local_state(activity, g);
    if (s < 0) {
      const std::string name = g >= 0 && static_cast<std::size_t>(g) < model.states.size()
                                   ? model.states[g]
                                   : std::to_string(g);
      throw Error(Errc::SupportOutsideActivity,
                  "entry state '" + name + "' is not a state of activity '" + act.name + "'");
    }
    local.emplace_back(s, p);
  }
  ActivityCssp out;
  std::vector<std::vector<double>> tables;
  std::vector<double> upper;
  tables.emplace_back(act.model.cost_table(0).begin(), act.model.cost_table(0).end());
  for (const BudgetBound& b : bounds) {
    if (b.cost_index < 1 || static_cast<std::size_t>(b.cost_index) > act.num_secondary()) {
      throw Error(Errc::DimensionMismatch, "activity '" + act.name + "' has no cost C_" +
                                               std::to_string(b.cost_index));
    }
    const auto table = act.model.cost_table(static_cast<std::size_t>(b.cost_index));
    tables.emplace_back(table.begin(), table.end());
    upper.push_back(b.upper);
    out.cost_indices.push_back(b.cost_index);
    out.lower.push_back(b.lower);
  }
  out.cssp = act.model.with_initial(local).with_costs(std::move(tables), std::move(upper));
  return out;
}

}  // namespace hcssp
