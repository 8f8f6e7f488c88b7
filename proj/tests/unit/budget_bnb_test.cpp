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

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "hcssp/budget_bnb.hpp"
#include "hcssp/error.hpp"
#include "hcssp/oracle.hpp"
#include "instances.hpp"

namespace hcssp {
namespace {

Partition box(std::vector<BudgetKey> keys, std::vector<double> lo, std::vector<double> hi) {
  return Partition{std::move(keys), std::move(lo), std::move(hi)};
}

TEST(InitialPartition, SingleActivityFullLikelihood) {
  const HcsspModel h = testing::wrap_single_activity(testing::make_ch1(), 10.0);
  const Partition q = initial_partition(h);
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q.keys[0], (BudgetKey{0, 1}));
  EXPECT_EQ(q.lo[0], 0.0);
  EXPECT_EQ(q.hi[0], 10.0);
}

TEST(InitialPartition, ScalesByMinimumLikelihood) {
  const HcsspModel h = testing::make_gated_pair({{1, 1}}, {{1, 1}}, 0.9, 10.0);
  const Partition q = initial_partition(h);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q.hi[0], 10.0);
  EXPECT_NEAR(q.hi[1], 11.111111111111111, 1e-12);

  const Partition half = initial_partition(testing::make_gated_pair({{1, 1}}, {{1, 1}}, 0.5, 4.0));
  EXPECT_EQ(half.hi, (std::vector<double>{4.0, 8.0}));
  EXPECT_EQ(half.lo, (std::vector<double>{0.0, 0.0}));
}

TEST(SplitLongestEdge, BisectsTheLongest) {
  const Partition q = box({{0, 1}, {1, 1}}, {0, 0}, {10, 4});
  auto [a, b] = split_longest_edge(q);
  EXPECT_EQ(a.lo, (std::vector<double>{0, 0}));
  EXPECT_EQ(a.hi, (std::vector<double>{5, 4}));
  EXPECT_EQ(b.lo, (std::vector<double>{5, 0}));
  EXPECT_EQ(b.hi, (std::vector<double>{10, 4}));
}

TEST(SplitLongestEdge, TiesGoToTheFirstKey) {
  auto [a, b] = split_longest_edge(box({{0, 1}, {1, 1}}, {0, 0}, {4, 4}));
  EXPECT_EQ(a.hi, (std::vector<double>{2, 4}));
  EXPECT_EQ(b.lo, (std::vector<double>{2, 0}));
}

TEST(SplitLongestEdge, SkipsDegenerateEdges) {
  auto [a, b] = split_longest_edge(box({{0, 1}, {1, 1}}, {2, 0}, {2, 6}));
  EXPECT_EQ(a.hi, (std::vector<double>{2, 3}));
  EXPECT_EQ(b.lo, (std::vector<double>{2, 3}));
  try {
    split_longest_edge(box({{0, 1}}, {2}, {2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegeneratePartition);
  }
}

// E1 always runs, E2 with probability 0.9. Cheap options are hazardous.
HcsspModel gated(double delta) {
  return testing::make_gated_pair({{3, 1}, {5, 0}}, {{4, 2}, {6, 0}}, 0.9, delta);
}

TEST(ComputeLb, LooseBoundsGiveUnconstrainedOptimum) {
  const HcsspModel h = gated(100.0);
  const double beta = compute_lb(h, initial_partition(h), kUnbounded);
  EXPECT_NEAR(beta, 3.0 + 0.9 * 4.0, 1e-9);
  const OracleResult oracle = brute_force_hcssp(h);
  ASSERT_TRUE(oracle.optimum.has_value());
  EXPECT_LE(beta, *oracle.optimum + 1e-9);
}

TEST(ComputeLb, ViolatedLowerLimitsGiveInfinity) {
  const HcsspModel h = gated(5.0);
  const Partition q = box({{0, 1}, {1, 1}}, {6, 0}, {7, 1});
  EXPECT_EQ(compute_lb(h, q, kUnbounded), kInf);
}

TEST(ComputeLb, SingleActivityGivesDualBound) {
  const HcsspModel h = testing::wrap_single_activity(testing::make_ch1(), 5.0);
  const double beta = compute_lb(h, initial_partition(h), 0);
  EXPECT_NEAR(beta, anytime_solve(testing::make_ch1(5.0), {.l = 0}).lower_bound, 1e-9);
  EXPECT_NEAR(beta, 6.0, 1e-6);
}

TEST(ComputeUb, SingleActivityMatchesAnytime) {
  const HcsspModel h = testing::wrap_single_activity(testing::make_ch1(), 5.0);
  const UpperBound ub = compute_ub(h, initial_partition(h), kUnbounded);
  const AnytimeResult direct = anytime_solve(testing::make_ch1(5.0));
  ASSERT_TRUE(ub.solution.has_value());
  EXPECT_NEAR(ub.alpha, direct.upper_bound, 1e-9);
  EXPECT_EQ(ub.solution->gamma.at(0).action(0), direct.incumbent->policy.action(0));
  EXPECT_TRUE(ub.solution->feasible);
}

TEST(ComputeUb, InfeasibleActivityGivesInfinity) {
  const HcsspModel h = testing::wrap_single_activity(testing::make_ch1(), 5.0);
  const UpperBound ub = compute_ub(h, box({{0, 1}}, {0}, {0.5}), kUnbounded);
  EXPECT_EQ(ub.alpha, kInf);
  EXPECT_FALSE(ub.solution.has_value());
}

TEST(ComputeUb, FeasibleAssemblyIsAboveOptimum) {
  // E1 keeps its cheap option, E2 is squeezed onto the safe one.
  const HcsspModel h = gated(2.0);
  const UpperBound ub = compute_ub(h, box({{0, 1}, {1, 1}}, {0, 0}, {1, 1}), kUnbounded);
  EXPECT_NEAR(ub.alpha, 3.0 + 0.9 * 6.0, 1e-9);
  const OracleResult oracle = brute_force_hcssp(h);
  ASSERT_TRUE(oracle.optimum.has_value());
  ASSERT_TRUE(ub.solution.has_value());
  EXPECT_GE(ub.alpha, *oracle.optimum - 1e-9);
  EXPECT_LE(ub.alpha, ub.procedural_bound + 1e-7);
  HierarchicalSolution copy = *ub.solution;
  evaluate_solution(h, copy);
  EXPECT_TRUE(copy.feasible);
  EXPECT_NEAR(copy.objective, ub.alpha, 1e-12);
}

TEST(BranchAndBound, SingleActivityMatchesAnytime) {
  std::mt19937 rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    const CsspModel c = testing::random_cssp(rng);
    const HcsspModel h = testing::wrap_single_activity(c, c.bounds()[0]);
    const AnytimeResult direct = anytime_solve(c);
    const BnbResult r = branch_and_bound(h, {.epsilon = 1e-6});
    if (direct.status == AnytimeStatus::Infeasible) {
      EXPECT_EQ(r.status, BnbStatus::Infeasible) << trial;
      EXPECT_FALSE(r.incumbent.has_value());
    } else {
      ASSERT_TRUE(r.incumbent.has_value()) << trial;
      EXPECT_NEAR(r.incumbent->objective, direct.upper_bound, 1e-6) << trial;
      EXPECT_EQ(r.status, BnbStatus::Converged);
    }
  }
}

TEST(BranchAndBound, WrappedChain) {
  const HcsspModel h = testing::wrap_single_activity(testing::make_ch1(), 5.0);
  const BnbResult r = branch_and_bound(h, {.epsilon = 1e-6});
  ASSERT_TRUE(r.incumbent.has_value());
  EXPECT_NEAR(r.incumbent->objective, 10.0, 1e-9);
  EXPECT_GE(r.beta, 10.0 - 1e-6);
  EXPECT_EQ(r.status, BnbStatus::Converged);
}

TEST(BranchAndBound, TwoGridActivitiesMatchJointEnumeration) {
  testing::GridOptions a{.w = 4, .h = 4, .start = {0, 0}, .goal = {3, 3}, .directions = {1, 2}};
  a.hazards = {{1, 1}, {2, 2}, {1, 3}};
  testing::GridOptions b{.w = 4, .h = 4, .start = {0, 0}, .goal = {3, 3}, .directions = {1, 2}};
  b.hazards = {{2, 0}, {2, 1}, {0, 2}};
  const HcsspModel h = testing::make_two_chain(a, b, 60.0);
  const OracleResult oracle = brute_force_hcssp(h);
  ASSERT_TRUE(oracle.optimum.has_value());
  const BnbResult r = branch_and_bound(h, {.epsilon = 1e-3});
  ASSERT_TRUE(r.incumbent.has_value());
  EXPECT_NEAR(r.incumbent->objective, *oracle.optimum, 1e-3);
  for (const auto& t : r.trace) {
    EXPECT_LE(t.beta, *oracle.optimum + 1e-9);
    EXPECT_GE(t.alpha, *oracle.optimum - 1e-9);
  }
}

TEST(BranchAndBound, SandwichMonotonicityAndFeasibility) {
  std::mt19937 rng(67);
  for (int trial = 0; trial < 25; ++trial) {
    const HcsspModel h = testing::random_hcssp(rng);
    const OracleResult oracle = brute_force_hcssp(h);
    for (std::size_t l : {std::size_t{0}, kUnbounded}) {
      const BnbResult r = branch_and_bound(h, {.epsilon = 1e-3, .l = l, .max_iterations = 400});
      for (std::size_t i = 0; i < r.trace.size(); ++i) {
        const auto& t = r.trace[i];
        EXPECT_LE(t.beta, t.alpha);
        if (i > 0) {
          EXPECT_GE(t.beta, r.trace[i - 1].beta);
          EXPECT_LE(t.alpha, r.trace[i - 1].alpha);
        }
        if (oracle.optimum) {
          EXPECT_LE(t.beta, *oracle.optimum + 1e-7) << trial;
          EXPECT_GE(t.alpha, *oracle.optimum - 1e-7) << trial;
        } else {
          EXPECT_EQ(t.alpha, kInf);
        }
      }
      if (r.incumbent) {
        HierarchicalSolution copy = *r.incumbent;
        evaluate_solution(h, copy);
        EXPECT_TRUE(copy.feasible);
        EXPECT_NEAR(copy.objective, r.alpha, 1e-9);
      }
      if (l == kUnbounded) {
        if (oracle.optimum) {
          ASSERT_TRUE(r.incumbent.has_value()) << trial;
          EXPECT_NEAR(r.incumbent->objective, *oracle.optimum, 1e-3) << trial;
        } else {
          EXPECT_EQ(r.status, BnbStatus::Infeasible) << trial;
        }
      }
    }
  }
}

TEST(BranchAndBound, DeterministicAndTraceFormat) {
  std::mt19937 rng(71);
  const HcsspModel h = testing::random_hcssp(rng);
  const BnbResult a = branch_and_bound(h, {.epsilon = 1e-3});
  const BnbResult b = branch_and_bound(h, {.epsilon = 1e-3});
  std::ostringstream ta, tb;
  write_bnb_trace_csv(ta, a.trace, false);
  write_bnb_trace_csv(tb, b.trace, false);
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(ta.str().substr(0, ta.str().find('\n')), "k,wall_time_s,alpha_k,beta_k,incumbent_obj");
  EXPECT_EQ(a.incumbent.has_value(), b.incumbent.has_value());
  if (a.incumbent) {
    EXPECT_EQ(a.incumbent->rho, b.incumbent->rho);
    EXPECT_EQ(a.incumbent->gamma, b.incumbent->gamma);
  }
}

TEST(BranchAndBound, BudgetStopsEarly) {
  const HcsspModel h = gated(2.0);
  const BnbResult r = branch_and_bound(h, {.epsilon = 1e-12, .max_iterations = 1});
  EXPECT_LE(r.iterations, 1u);
}

}  // namespace
}  // namespace hcssp
