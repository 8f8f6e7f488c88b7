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
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "hcssp/cssp_solver.hpp"
#include "hcssp/hcssp_model.hpp"
#include "hcssp/reduction.hpp"

namespace hcssp {

/// (activity, cost index) pair owning one budget dimension.
struct BudgetKey {
  int activity = 0;
  int cost_index = 1;
  auto operator<=>(const BudgetKey&) const = default;
};

/// Axis-aligned box in budget-allocation space, one interval per key.
struct Partition {
  std::vector<BudgetKey> keys;  // sorted
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t size() const { return keys.size(); }
  /// Index of the interval for `key`, or -1.
  int find(const BudgetKey& key) const;
  /// Half of the longest interval length.
  double radius() const;
};

/// [0, Delta_j / L(E)] for every constrained pair. Throws NeverActivated.
Partition initial_partition(const HcsspModel& model);

/// Bisects the first longest interval. Throws DegeneratePartition.
std::pair<Partition, Partition> split_longest_edge(const Partition& q);

/// Memoized activity planning shared by the bound computations.
class ActivityPlanner {
 public:
  ActivityPlanner(const HcsspModel& model, std::size_t l) : model_(model), l_(l) {}

  /// Anytime solve of activity `activity` from `entry` (global ids) under
  /// the upper limits of `q`.
  std::shared_ptr<const AnytimeResult> plan(int activity, const Distribution& entry, const Partition& q);

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  using Key = std::tuple<int, Distribution, std::vector<double>>;
  const HcsspModel& model_;
  std::size_t l_;
  std::mutex mutex_;
  std::map<Key, std::shared_ptr<const AnytimeResult>> cache_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Lower bound beta(Q) on the best solution whose budget allocation lies in Q.
double compute_lb(const HcsspModel& model, const Partition& q, std::size_t l, ActivityPlanner& planner);
double compute_lb(const HcsspModel& model, const Partition& q, std::size_t l);

struct UpperBound {
  double alpha = kInf;                        // exact objective of `solution`
  double procedural_bound = kInf;             // Phi+ from procedural planning
  std::optional<HierarchicalSolution> solution;
};

/// Upper bound alpha(Q) with a feasible solution when one is found.
UpperBound compute_ub(const HcsspModel& model, const Partition& q, std::size_t l, ActivityPlanner& planner);
UpperBound compute_ub(const HcsspModel& model, const Partition& q, std::size_t l);

struct BnbConfig {
  double epsilon = 1e-6;
  std::size_t l = kUnbounded;
  std::size_t max_iterations = kUnbounded;
  double time_budget_s = kInf;
};

struct BnbTraceRecord {
  std::size_t k = 0;
  double wall_time_s = 0.0;
  double alpha = kInf;
  double beta = -kInf;
  double incumbent = kInf;
};

enum class BnbStatus {
  Converged,      // alpha - beta <= epsilon with an incumbent
  Infeasible,     // beta = inf: no feasible solution anywhere
  Budget,         // stopped by the iteration or time budget
  Exhausted,      // only unsplittable partitions remain, gap still open
};

struct BnbResult {
  BnbStatus status = BnbStatus::Budget;
  std::optional<HierarchicalSolution> incumbent;
  double alpha = kInf;
  double beta = -kInf;
  std::size_t iterations = 0;
  std::size_t active_partitions = 0;
  std::size_t pruned_partitions = 0;
  std::vector<BnbTraceRecord> trace;
};

BnbResult branch_and_bound(const HcsspModel& model, const BnbConfig& config);

/// CSV with header `k,wall_time_s,alpha_k,beta_k,incumbent_obj`.
void write_bnb_trace_csv(std::ostream& os, const std::vector<BnbTraceRecord>& trace,
                         bool include_time = true);

}  // namespace hcssp
