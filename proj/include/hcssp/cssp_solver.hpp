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
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "hcssp/cssp_model.hpp"

namespace hcssp {

/// Iteration budget meaning "run to convergence".
inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

/// Slack allowed on g_i <= 0 when classifying a policy as feasible.
inline constexpr double kFeasibilityTolerance = 1e-9;

bool is_feasible(const PolicyValue& value);

/// A deterministic policy together with its exact value and L(lambda, pi).
struct Candidate {
  DeterministicPolicy policy;
  PolicyValue value;
  double lagrangian = 0.0;
};

/// Optimal policy of the scalarized SSP C_0 + lambda . C.
struct WeightedSolution {
  DeterministicPolicy policy;      // restricted to its reachable states
  PolicyValue value;               // exact f, g of `policy`
  double scalarized = 0.0;         // f + lambda . g
  std::vector<double> cost_to_go;  // per state, without the -lambda.Delta offset; inf if no proper policy
};

/// Reusable minimizer of L(lambda, .) over proper deterministic policies.
///
/// Uses Jacobi value iteration for a warm start and finishes with exact
/// policy iteration, so the returned policy is optimal to solver precision.
/// Ties are broken toward the lowest action index in each state.
class WeightedSspSolver {
 public:
  explicit WeightedSspSolver(const CsspModel& model);

  /// `usable` masks global actions (empty means all usable). `warm_start`
  /// seeds value iteration; any finite vector works, and a lower bound on the
  /// optimal cost-to-go (an admissible heuristic) converges from below.
  /// Returns nullopt when no proper policy exists from the initial support.
  std::optional<WeightedSolution> solve(std::span<const double> lambda,
                                        std::span<const std::uint8_t> usable = {},
                                        std::span<const double> warm_start = {}) const;

  /// Minimum over proper policies (within `usable`) of the expected total
  /// of cost function `index` from the initial distribution; nullopt when no
  /// proper policy exists. Needs positive primary cost on every cycle.
  std::optional<double> min_expected_cost(std::size_t index, std::span<const std::uint8_t> usable = {}) const;

  const CsspModel& model() const { return model_; }

 private:
  struct GoalReach {
    std::vector<std::uint8_t> alive;  // states with a proper policy
    std::vector<std::uint8_t> safe;   // usable actions that stay alive
    std::vector<int> attractor;       // an action leading toward the goal
  };
  GoalReach goal_reach(std::span<const std::uint8_t> usable) const;

  const CsspModel& model_;
  std::vector<std::vector<double>> expected_;  // per cost function, per global action
  std::vector<std::size_t> pred_begin_;        // reverse edges: successor -> (state, action)
  std::vector<std::pair<StateId, std::uint32_t>> pred_;
  std::vector<StateId> action_state_;          // global action -> owning state
};

/// Throws NoProperPolicy when the goal cannot be reached almost surely from
/// the initial support.
WeightedSolution solve_weighted_ssp(const CsspModel& model, std::span<const double> lambda,
                                    std::span<const double> heuristic = {});

struct DualConfig {
  double lambda_cap = 1e6;
  std::size_t max_supergradient_iterations = 500;
  std::size_t max_line_search_iterations = 200;
};

/// Result of maximizing the Lagrangian dual L(lambda) = min_pi L(lambda, pi).
struct DualState {
  std::vector<double> lambda_star;
  double dual_value = 0.0;               // L(lambda*)
  Candidate best_dual;                   // the minimizer pi^1 at lambda*
  std::optional<Candidate> best_feasible;  // cheapest feasible policy met during the ascent
  std::vector<double> cost_to_go;        // scalarized cost-to-go at lambda*
  std::size_t solves = 0;
};

/// Throws InfeasibleRelaxation if no proper policy exists at lambda = 0.
///
/// One secondary cost: exact line search on the sign of g_1(pi_lambda),
/// splitting at the intersection of the two bracketing policy lines; a flat
/// optimal segment resolves to its midpoint. Two or more: projected
/// supergradient ascent from lambda = 0 with step 1/sqrt(k).
DualState dual_ascent(const CsspModel& model, const DualConfig& config = {},
                      std::span<const double> heuristic = {});

/// Enumerates proper deterministic policies in nondecreasing L(lambda, .)
/// by Lawler partitioning over forced/forbidden (state, action) decisions.
/// Exhaustive when drained; policies differing only on unreachable states
/// are the same policy.
class PolicyEnumerator {
 public:
  PolicyEnumerator(const CsspModel& model, std::vector<double> lambda,
                   std::span<const double> warm_start = {});

  std::optional<Candidate> next();
  std::size_t emitted() const { return emitted_; }

  /// Drops subproblems whose every policy violates a bound (certified by
  /// min_expected_cost). The stream then covers all feasible policies but
  /// no longer all proper ones.
  void skip_infeasible_subproblems() { skip_infeasible_ = true; }
  std::size_t skipped() const { return skipped_; }

 private:
  struct Node {
    double key = 0.0;
    std::uint64_t seq = 0;
    std::vector<std::pair<StateId, int>> forced;
    std::vector<std::pair<StateId, int>> forbidden;
    std::shared_ptr<const std::vector<double>> warm;
    std::optional<WeightedSolution> solution;
  };
  struct Later {
    bool operator()(const std::shared_ptr<Node>& a, const std::shared_ptr<Node>& b) const {
      if (a->key != b->key) return a->key > b->key;
      return a->seq > b->seq;
    }
  };

  std::vector<std::uint8_t> mask_for(const Node& node) const;

  const CsspModel& model_;
  std::vector<double> lambda_;
  WeightedSspSolver solver_;
  std::priority_queue<std::shared_ptr<Node>, std::vector<std::shared_ptr<Node>>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::size_t emitted_ = 0;
  bool skip_infeasible_ = false;
  std::size_t skipped_ = 0;
};

/// True when some bound is exceeded by every proper policy within `usable`
/// (by more than the feasibility tolerance plus a relative margin).
bool bounds_unattainable(const WeightedSspSolver& solver, std::span<const std::uint8_t> usable = {});

/// Stage-2 stream for a dual state computed on the same model.
PolicyEnumerator stage2_enumerate(const CsspModel& model, const DualState& dual);

enum class AnytimeStatus {
  Optimal,     // bounds met
  Feasible,    // incumbent found, gap open (budget exhausted)
  Unknown,     // no incumbent, budget exhausted
  Infeasible,  // certified: no proper feasible deterministic policy
};

struct AnytimeTraceRecord {
  std::size_t iter = 0;
  double lb = 0.0;
  double ub = kInf;
  bool feasible_found = false;
};

struct AnytimeResult {
  AnytimeStatus status = AnytimeStatus::Unknown;
  std::optional<Candidate> incumbent;
  double lower_bound = -kInf;
  double upper_bound = kInf;
  std::size_t iterations_used = 0;
  std::vector<AnytimeTraceRecord> trace;
  std::vector<double> lambda_star;
  std::optional<Candidate> best_dual;  // pi^1, present unless no proper policy exists
};

struct AnytimeConfig {
  std::size_t l = kUnbounded;  // stage-2 expansion cap; 0 = dual bound only
  DualConfig dual;
};

/// Two-stage anytime C-SSP solve: dual ascent, then next-best enumeration
/// for up to `l` expansions. Stops early once L(lambda*, pi^k) reaches the
/// incumbent cost.
AnytimeResult anytime_solve(const CsspModel& model, const AnytimeConfig& config = {},
                            std::span<const double> heuristic = {});

/// CSV with header `iter,lb,ub,feasible_found`.
void write_trace_csv(std::ostream& os, std::span<const AnytimeTraceRecord> trace);

}  // namespace hcssp
