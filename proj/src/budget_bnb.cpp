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

#include "hcssp/budget_bnb.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <exception>
#include <ostream>
#include <queue>

#include "hcssp/error.hpp"

namespace hcssp {

int Partition::find(const BudgetKey& key) const {
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return -1;
  return static_cast<int>(it - keys.begin());
}

double Partition::radius() const {
  double r = 0.0;
  for (std::size_t i = 0; i < keys.size(); ++i) r = std::max(r, 0.5 * (hi[i] - lo[i]));
  return r;
}

Partition initial_partition(const HcsspModel& model) {
  std::vector<std::pair<BudgetKey, double>> entries;
  for (const Constraint& c : model.constraints) {
    for (const ConstraintTerm& term : c.terms) {
      const double l = min_activity_likelihood(model, term.activity);
      entries.push_back({{term.activity, term.cost_index}, c.bound / l});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Partition q;
  for (const auto& [key, upper] : entries) {
    q.keys.push_back(key);
    q.lo.push_back(0.0);
    q.hi.push_back(upper);
  }
  return q;
}

std::pair<Partition, Partition> split_longest_edge(const Partition& q) {
  std::size_t best = q.size();
  double length = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double w = q.hi[i] - q.lo[i];
    if (w > length) {
      length = w;
      best = i;
    }
  }
  if (best == q.size()) throw Error(Errc::DegeneratePartition, "every interval has zero length");
  const double mid = q.lo[best] + 0.5 * length;
  Partition left = q, right = q;
  left.hi[best] = mid;
  right.lo[best] = mid;
  return {std::move(left), std::move(right)};
}

// ---------------------------------------------------------------------------
// Activity planning cache

std::shared_ptr<const AnytimeResult> ActivityPlanner::plan(int activity, const Distribution& entry,
                                                           const Partition& q) {
  std::vector<BudgetBound> bounds;
  std::vector<double> upper;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q.keys[i].activity != activity) continue;
    bounds.push_back({q.keys[i].cost_index, q.lo[i], q.hi[i]});
    upper.push_back(q.hi[i]);
  }
  Key key{activity, entry, upper};
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  const ActivityCssp problem = activity_to_cssp(model_, activity, entry, bounds);
  AnytimeConfig config;
  config.l = l_;
  auto result = std::make_shared<const AnytimeResult>(anytime_solve(problem.cssp, config));
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = cache_.emplace(std::move(key), std::move(result));
  if (inserted) ++misses_;
  return it->second;
}

namespace {

struct PlannedActivity {
  std::shared_ptr<const AnytimeResult> result;  // null when the activity cannot be entered
  std::vector<int> cost_indices;                // bounded cost functions, in secondary order
};

// Plans every activity in event order. Without a procedural policy, an
// event's entry distribution mixes its incoming edges weighted by the
// largest probability any choice gives them.
std::vector<PlannedActivity> plan_activities(const HcsspModel& model, const Partition& q,
                                             ActivityPlanner& planner) {
  const auto order = topological_order_events(model);
  std::vector<PlannedActivity> planned(model.activities.size());
  std::vector<std::map<StateId, double>> incoming(model.events.size());
  std::vector<double> weight(model.events.size(), 0.0);
  for (auto [s, p] : model.initial) incoming[model.start_event][s] += p;
  weight[model.start_event] = 1.0;

  for (EventId t : order) {
    if (weight[t] <= 0.0 || t == model.end_event) continue;
    Distribution here;
    for (auto [s, w] : incoming[t]) here.emplace_back(s, w / weight[t]);
    std::map<EventId, double> edge;
    for (const Choice& c : model.events[t].choices) {
      std::map<EventId, double> row;
      for (auto [next, p] : c.next) row[next] += p;
      for (auto [next, p] : row) edge[next] = std::max(edge[next], p);
    }
    for (auto [next, p] : edge) {
      if (p <= 0.0) continue;
      const int e = model.activity_on_edge(t, next);
      if (e < 0) {
        for (auto [s, w] : here) incoming[next][s] += p * w;
        weight[next] += p;
        continue;
      }
      Distribution entry;
      try {
        entry = to_global(model, e, restrict_to_activity(model, e, here));
      } catch (const Error& err) {
        if (err.code() != Errc::EmptySupport) throw;
        continue;
      }
      PlannedActivity& pa = planned[e];
      pa.result = planner.plan(e, entry, q);
      for (const BudgetKey& key : q.keys) {
        if (key.activity == e) pa.cost_indices.push_back(key.cost_index);
      }
      const AnytimeResult& r = *pa.result;
      const Candidate* exit = r.incumbent ? &*r.incumbent : (r.best_dual ? &*r.best_dual : nullptr);
      if (!exit) continue;
      for (auto [s, w] : to_global(model, e, exit->value.termination)) incoming[next][s] += p * w;
      weight[next] += p;
    }
  }
  return planned;
}

double secondary_of(const PlannedActivity& pa, const Candidate& c, int cost_index) {
  for (std::size_t i = 0; i < pa.cost_indices.size(); ++i) {
    if (pa.cost_indices[i] == cost_index) return c.value.raw_g[i];
  }
  return 0.0;
}

}  // namespace

double compute_lb(const HcsspModel& model, const Partition& q, std::size_t l, ActivityPlanner& planner) {
  const auto planned = plan_activities(model, q, planner);
  CostEstimates est;
  est.f_bar.resize(model.activities.size());
  for (std::size_t e = 0; e < planned.size(); ++e) {
    const auto& r = planned[e].result;
    est.f_bar[e] = (!r || r->status == AnytimeStatus::Infeasible) ? kInf : r->lower_bound;
  }
  for (std::size_t i = 0; i < q.size(); ++i) {
    est.g_bar[{q.keys[i].activity, q.keys[i].cost_index}] = q.lo[i];
  }
  const ProceduralCssp proc = procedural_to_cssp(model, est);
  AnytimeConfig config;
  config.l = l;
  const AnytimeResult r = anytime_solve(proc.cssp, config);
  if (r.status == AnytimeStatus::Infeasible) return kInf;
  return r.lower_bound;
}

double compute_lb(const HcsspModel& model, const Partition& q, std::size_t l) {
  ActivityPlanner planner(model, l);
  return compute_lb(model, q, l, planner);
}

UpperBound compute_ub(const HcsspModel& model, const Partition& q, std::size_t l, ActivityPlanner& planner) {
  const auto planned = plan_activities(model, q, planner);
  CostEstimates est;
  est.f_bar.resize(model.activities.size());
  for (std::size_t e = 0; e < planned.size(); ++e) {
    const auto& r = planned[e].result;
    est.f_bar[e] = (r && r->incumbent) ? r->incumbent->value.f : kInf;
  }
  for (const Constraint& c : model.constraints) {
    for (const ConstraintTerm& term : c.terms) {
      const auto& pa = planned[term.activity];
      est.g_bar[{term.activity, term.cost_index}] =
          (pa.result && pa.result->incumbent) ? secondary_of(pa, *pa.result->incumbent, term.cost_index)
                                              : 0.0;
    }
  }
  const ProceduralCssp proc = procedural_to_cssp(model, est);
  AnytimeConfig config;
  config.l = l;
  const AnytimeResult r = anytime_solve(proc.cssp, config);
  UpperBound out;
  if (!r.incumbent) return out;

  HierarchicalSolution sol;
  sol.rho = proc.to_procedural(r.incumbent->policy);
  try {
    const auto reach = event_reach(model, sol.rho);
    for (std::size_t e = 0; e < model.activities.size(); ++e) {
      const Activity& act = model.activities[e];
      if (reach[act.start_event] <= 0.0) continue;
      if (activity_likelihood(model, sol.rho, static_cast<int>(e)) <= 0.0) continue;
      sol.gamma.emplace(static_cast<int>(e), planned[e].result->incumbent->policy);
    }
    evaluate_solution(model, sol);
  } catch (const Error&) {
    // Entry distributions under rho differ from the planning mixture.
    return out;
  }
  if (!sol.feasible) return out;
  out.alpha = sol.objective;
  out.procedural_bound = r.upper_bound;
  out.solution = std::move(sol);
  return out;
}

UpperBound compute_ub(const HcsspModel& model, const Partition& q, std::size_t l) {
  ActivityPlanner planner(model, l);
  return compute_ub(model, q, l, planner);
}

// ---------------------------------------------------------------------------
// Branch and bound

namespace {

struct Bounded {
  Partition q;
  double beta = -kInf;
  UpperBound ub;
  std::uint64_t seq = 0;
};

struct LaterBeta {
  bool operator()(const std::shared_ptr<Bounded>& a, const std::shared_ptr<Bounded>& b) const {
    if (a->beta != b->beta) return a->beta > b->beta;
    return a->seq > b->seq;
  }
};

}  // namespace

BnbResult branch_and_bound(const HcsspModel& model, const BnbConfig& config) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

  ActivityPlanner planner(model, config.l);
  BnbResult result;
  std::uint64_t seq = 0;

  auto bound = [&](Partition q) {
    auto b = std::make_shared<Bounded>();
    b->beta = compute_lb(model, q, config.l, planner);
    b->ub = compute_ub(model, q, config.l, planner);
    b->q = std::move(q);
    return b;
  };

  std::priority_queue<std::shared_ptr<Bounded>, std::vector<std::shared_ptr<Bounded>>, LaterBeta> queue;
  double frozen_min = kInf;
  double pruned_min = kInf;
  double alpha = kInf;

  auto offer = [&](const std::shared_ptr<Bounded>& b) {
    if (b->ub.solution && b->ub.alpha < alpha) {
      alpha = b->ub.alpha;
      result.incumbent = b->ub.solution;
    }
  };
  auto admit = [&](std::shared_ptr<Bounded> b) {
    if (b->beta >= alpha - config.epsilon) {
      pruned_min = std::min(pruned_min, b->beta);
      ++result.pruned_partitions;
      return;
    }
    b->seq = seq++;
    queue.push(std::move(b));
  };
  auto global_beta = [&] {
    double beta = std::min({frozen_min, pruned_min, alpha});
    if (!queue.empty()) beta = std::min(beta, queue.top()->beta);
    return beta;
  };
  auto record = [&](std::size_t k) {
    result.alpha = alpha;
    result.beta = std::max(result.beta, global_beta());
    result.trace.push_back({k, elapsed(), alpha, result.beta, alpha});
  };

  auto root = bound(initial_partition(model));
  offer(root);
  admit(std::move(root));
  record(0);

  std::size_t k = 0;
  for (;;) {
    if (!std::isfinite(result.beta)) {
      result.status = BnbStatus::Infeasible;
      break;
    }
    if (std::isfinite(alpha) && alpha - result.beta <= config.epsilon) {
      result.status = BnbStatus::Converged;
      break;
    }
    if (queue.empty()) {
      result.status = BnbStatus::Exhausted;
      break;
    }
    if (k >= config.max_iterations || elapsed() >= config.time_budget_s) {
      result.status = BnbStatus::Budget;
      break;
    }
    std::shared_ptr<Bounded> top = queue.top();
    queue.pop();
    ++k;
    if (top->beta >= alpha - config.epsilon) {
      pruned_min = std::min(pruned_min, top->beta);
      ++result.pruned_partitions;
      record(k);
      continue;
    }
    if (top->q.radius() <= 0.0) {
      frozen_min = std::min(frozen_min, top->beta);
      record(k);
      continue;
    }
    auto [left, right] = split_longest_edge(top->q);
    std::array<Partition, 2> parts{std::move(left), std::move(right)};
    std::array<std::shared_ptr<Bounded>, 2> children;
    std::array<std::exception_ptr, 2> errors;
#pragma omp parallel for schedule(static, 1)
    for (int i = 0; i < 2; ++i) {
      try {
        children[i] = bound(std::move(parts[i]));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
    for (auto& child : children) {
      child->beta = std::max(child->beta, top->beta);
      offer(child);
    }
    for (auto& child : children) admit(std::move(child));
    record(k);
  }
  result.iterations = k;
  result.active_partitions = queue.size();
  result.alpha = alpha;
  return result;
}

void write_bnb_trace_csv(std::ostream& os, const std::vector<BnbTraceRecord>& trace, bool include_time) {
  os << "k,wall_time_s,alpha_k,beta_k,incumbent_obj\n";
  const auto old_precision = os.precision(17);
  for (const auto& r : trace) {
    os << r.k << ',';
    if (include_time) os << r.wall_time_s;
    os << ',' << r.alpha << ',' << r.beta << ',' << r.incumbent << '\n';
  }
  os.precision(old_precision);
}

}  // namespace hcssp
