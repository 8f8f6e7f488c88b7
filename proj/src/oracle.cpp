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

#include "hcssp/oracle.hpp"

#include <algorithm>
#include <deque>
#include <map>

#include "hcssp/cssp_solver.hpp"
#include "hcssp/error.hpp"

namespace hcssp {

namespace {

// First reachable non-goal state without an action, or -1.
StateId first_open_state(const CsspModel& model, const DeterministicPolicy& policy) {
  const std::size_t n = model.num_states();
  std::vector<std::uint8_t> seen(n, 0);
  std::deque<StateId> frontier;
  for (std::size_t s = 0; s < n; ++s) {
    if (model.initial()[s] > 0.0) {
      seen[s] = 1;
      frontier.push_back(static_cast<StateId>(s));
    }
  }
  while (!frontier.empty()) {
    const StateId s = frontier.front();
    frontier.pop_front();
    if (model.is_goal(s)) continue;
    const int a = policy.action(s);
    if (a == DeterministicPolicy::kNone) return s;
    for (const Outcome& o : model.outcomes(s, a)) {
      if (o.prob > 0.0 && !seen[o.next]) {
        seen[o.next] = 1;
        frontier.push_back(o.next);
      }
    }
  }
  return -1;
}

}  // namespace

void enumerate_policies(const CsspModel& model,
                        const std::function<void(const DeterministicPolicy&, const PolicyValue&)>& visit,
                        std::size_t limit) {
  const std::size_t n = model.num_states();
  {
    std::vector<std::uint8_t> seen(n, 0);
    std::deque<StateId> frontier;
    for (std::size_t s = 0; s < n; ++s) {
      if (model.initial()[s] > 0.0) {
        seen[s] = 1;
        frontier.push_back(static_cast<StateId>(s));
      }
    }
    double product = 1.0;
    while (!frontier.empty()) {
      const StateId s = frontier.front();
      frontier.pop_front();
      if (model.is_goal(s)) continue;
      product *= static_cast<double>(std::max<std::size_t>(1, model.num_actions(s)));
      if (product > static_cast<double>(limit)) {
        throw Error(Errc::TooLarge, "more than " + std::to_string(limit) + " deterministic policies");
      }
      for (std::size_t a = 0; a < model.num_actions(s); ++a) {
        for (const Outcome& o : model.outcomes(s, static_cast<int>(a))) {
          if (o.prob > 0.0 && !seen[o.next]) {
            seen[o.next] = 1;
            frontier.push_back(o.next);
          }
        }
      }
    }
  }

  DeterministicPolicy policy(n);
  std::function<void()> dfs = [&] {
    const StateId s = first_open_state(model, policy);
    if (s < 0) {
      PolicyValue value;
      try {
        value = evaluate_policy(model, policy);
      } catch (const Error& e) {
        if (e.code() == Errc::ImproperPolicy) return;
        throw;
      }
      visit(policy, value);
      return;
    }
    for (std::size_t a = 0; a < model.num_actions(s); ++a) {
      policy.set(s, static_cast<int>(a));
      dfs();
    }
    policy.set(s, DeterministicPolicy::kNone);
  };
  dfs();
}

OracleResult brute_force_cssp(const CsspModel& model, std::size_t limit) {
  OracleResult out;
  enumerate_policies(
      model,
      [&](const DeterministicPolicy& policy, const PolicyValue& value) {
        ++out.count;
        if (!is_feasible(value)) return;
        if (!out.optimum || value.f < *out.optimum) {
          out.optimum = value.f;
          out.policy = policy;
        }
      },
      limit);
  return out;
}

// ---------------------------------------------------------------------------
// HC-SSP oracle

namespace {

struct ActivityOption {
  DeterministicPolicy policy;
  double f = 0.0;
  std::vector<double> raw_g;
  Distribution exit;  // global ids
};

bool dominates(const ActivityOption& a, const ActivityOption& b, const std::vector<int>& indices) {
  if (a.f > b.f) return false;
  for (int i : indices) {
    if (a.raw_g[i - 1] > b.raw_g[i - 1]) return false;
  }
  return true;
}

class HcsspOracle {
 public:
  HcsspOracle(const HcsspModel& model, const HcsspOracleOptions& options)
      : model_(model), options_(options), events_(topological_order_events(model)) {
    constrained_.resize(model.activities.size());
    for (const Constraint& c : model.constraints) {
      for (const ConstraintTerm& t : c.terms) constrained_[t.activity].push_back(t.cost_index);
    }
  }

  OracleResult run() {
    ProceduralPolicy rho(model_.events.size(), DeterministicPolicy::kNone);
    std::vector<double> reach(model_.events.size(), 0.0);
    reach[model_.start_event] = 1.0;
    procedural(0, rho, reach);
    return std::move(result_);
  }

 private:
  void procedural(std::size_t i, ProceduralPolicy& rho, const std::vector<double>& reach) {
    if (i == events_.size()) {
      assemble(rho, reach);
      return;
    }
    const EventId t = events_[i];
    const auto& choices = model_.events[t].choices;
    if (choices.empty()) {
      procedural(i + 1, rho, reach);
      return;
    }
    if (reach[t] <= 0.0) {
      rho[t] = 0;
      procedural(i + 1, rho, reach);
      return;
    }
    for (std::size_t c = 0; c < choices.size(); ++c) {
      rho[t] = static_cast<int>(c);
      std::vector<double> next = reach;
      for (auto [u, p] : choices[c].next) next[u] += reach[t] * p;
      procedural(i + 1, rho, next);
    }
    rho[t] = DeterministicPolicy::kNone;
  }

  // Flows of every event edge under rho, then a walk over activated activities.
  void assemble(const ProceduralPolicy& rho, const std::vector<double>& reach) {
    rho_ = &rho;
    reach_ = &reach;
    likelihood_.assign(model_.activities.size(), 0.0);
    for (std::size_t e = 0; e < model_.activities.size(); ++e) {
      const Activity& act = model_.activities[e];
      if (reach[act.start_event] <= 0.0) continue;
      double p = 0.0;
      for (auto [u, q] : model_.events[act.start_event].choices[rho[act.start_event]].next) {
        if (u == act.end_event) p += q;
      }
      likelihood_[e] = reach[act.start_event] * p;
    }
    activated_.clear();
    for (int e : topological_order(model_)) {
      if (likelihood_[e] > 0.0) activated_.push_back(e);
    }
    chosen_.assign(model_.activities.size(), nullptr);
    activities(0);
  }

  // Entry distribution of activity e from the options chosen upstream.
  Distribution entry_of(int e) const {
    const EventId target = model_.activities[e].start_event;
    std::vector<std::map<StateId, double>> incoming(model_.events.size());
    for (auto [s, p] : model_.initial) incoming[model_.start_event][s] += p;
    for (EventId t : events_) {
      const double r = (*reach_)[t];
      if (r <= 0.0) continue;
      Distribution here;
      for (auto [s, w] : incoming[t]) here.emplace_back(s, w / r);
      if (t == target) return here;
      if (t == model_.end_event) continue;
      for (auto [u, p] : model_.events[t].choices[(*rho_)[t]].next) {
        const double flow = r * p;
        if (flow <= 0.0) continue;
        const int a = model_.activity_on_edge(t, u);
        const Distribution& out = a >= 0 ? chosen_[a]->exit : here;
        for (auto [s, w] : out) incoming[u][s] += flow * w;
      }
    }
    return {};
  }

  const std::vector<ActivityOption>& options_for(int e, const Distribution& entry) {
    auto key = std::make_pair(e, entry);
    if (auto it = options_cache_.find(key); it != options_cache_.end()) return it->second;
    const CsspModel m = model_.activities[e].model.with_initial(restrict_to_activity(model_, e, entry));
    // Pareto front per termination distribution.
    std::map<Distribution, std::vector<ActivityOption>> classes;
    enumerate_policies(
        m,
        [&](const DeterministicPolicy& policy, const PolicyValue& value) {
          ActivityOption opt{policy, value.f, value.raw_g, to_global(model_, e, value.termination)};
          auto& front = classes[opt.exit];
          for (const ActivityOption& kept : front) {
            if (dominates(kept, opt, constrained_[e])) return;
          }
          std::erase_if(front, [&](const ActivityOption& kept) { return dominates(opt, kept, constrained_[e]); });
          front.push_back(std::move(opt));
        },
        options_.limit);
    std::vector<ActivityOption> all;
    for (auto& [exit, front] : classes) {
      for (auto& opt : front) all.push_back(std::move(opt));
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const ActivityOption& a, const ActivityOption& b) { return a.f < b.f; });
    return options_cache_.emplace(std::move(key), std::move(all)).first->second;
  }

  bool within_partition(int e, const ActivityOption& opt) const {
    if (!options_.partition) return true;
    const Partition& q = *options_.partition;
    for (int idx : constrained_[e]) {
      const int k = q.find({e, idx});
      if (k >= 0 && opt.raw_g[idx - 1] > q.hi[k] + kHierarchyFeasibilityTolerance) return false;
    }
    return true;
  }

  void activities(std::size_t i) {
    if (i == activated_.size()) {
      leaf();
      return;
    }
    const int e = activated_[i];
    const Distribution entry = entry_of(e);
    Distribution local_check;
    try {
      local_check = restrict_to_activity(model_, e, entry);
    } catch (const Error& err) {
      if (err.code() == Errc::EmptySupport) return;
      throw;
    }
    // Costs are nonnegative, so partial sums only grow down the tree.
    const double base = partial_objective_;
    for (const ActivityOption& opt : options_for(e, entry)) {
      if (result_.optimum && base + likelihood_[e] * opt.f >= *result_.optimum) break;
      if (!within_partition(e, opt)) continue;
      chosen_[e] = &opt;
      partial_objective_ = base + likelihood_[e] * opt.f;
      if (!violates_constraints()) activities(i + 1);
    }
    partial_objective_ = base;
    chosen_[e] = nullptr;
  }

  // Constraint charge of a chosen option, raised to the allocation floor.
  double charge(const ConstraintTerm& t) const {
    double g = chosen_[t.activity]->raw_g[t.cost_index - 1];
    if (options_.partition && options_.allocation) {
      const int k = options_.partition->find({t.activity, t.cost_index});
      if (k >= 0) g = std::max(g, options_.partition->lo[k]);
    }
    return g;
  }

  // True if the activities chosen so far already break a bound.
  bool violates_constraints() const {
    for (const Constraint& c : model_.constraints) {
      double total = 0.0;
      for (const ConstraintTerm& t : c.terms) {
        if (likelihood_[t.activity] <= 0.0 || !chosen_[t.activity]) continue;
        total += likelihood_[t.activity] * charge(t);
      }
      if (total > c.bound + kHierarchyFeasibilityTolerance) return true;
    }
    return false;
  }

  void leaf() {
    if (++result_.count > options_.limit) {
      throw Error(Errc::TooLarge, "more than " + std::to_string(options_.limit) + " hierarchical candidates");
    }
    double objective = 0.0;
    for (int e : activated_) objective += likelihood_[e] * chosen_[e]->f;
    for (const Constraint& c : model_.constraints) {
      double total = 0.0;
      for (const ConstraintTerm& t : c.terms) {
        if (likelihood_[t.activity] <= 0.0) continue;
        total += likelihood_[t.activity] * charge(t);
      }
      if (total > c.bound + kHierarchyFeasibilityTolerance) return;
    }
    if (result_.optimum && objective >= *result_.optimum) return;
    HierarchicalSolution sol;
    sol.rho = *rho_;
    for (int e : activated_) sol.gamma.emplace(e, chosen_[e]->policy);
    evaluate_solution(model_, sol);
    result_.optimum = sol.objective;
    result_.solution = std::move(sol);
  }

  const HcsspModel& model_;
  HcsspOracleOptions options_;
  std::vector<EventId> events_;
  std::vector<std::vector<int>> constrained_;
  std::map<std::pair<int, Distribution>, std::vector<ActivityOption>> options_cache_;

  const ProceduralPolicy* rho_ = nullptr;
  const std::vector<double>* reach_ = nullptr;
  std::vector<double> likelihood_;
  std::vector<int> activated_;
  std::vector<const ActivityOption*> chosen_;
  double partial_objective_ = 0.0;
  OracleResult result_;
};

}  // namespace

OracleResult brute_force_hcssp(const HcsspModel& model, const HcsspOracleOptions& options) {
  return HcsspOracle(model, options).run();
}

}  // namespace hcssp
