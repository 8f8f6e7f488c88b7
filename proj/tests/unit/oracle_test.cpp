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
#include <set>

#include "hcssp/cssp_solver.hpp"
#include "hcssp/error.hpp"
#include "hcssp/oracle.hpp"
#include "instances.hpp"

namespace hcssp {
namespace {

CsspModel grid_cssp(const testing::GridOptions& grid) {
  HcsspModel scratch;
  const Activity act = testing::grid_activity(scratch, "g", "g", grid, "start", "goal", 0, 1);
  return act.model.with_initial({{*act.model.find_state("start"), 1.0}});
}

// s chooses left (activity A) or right (activity B); both then reach e.
HcsspModel two_branches(std::vector<std::pair<double, double>> left,
                        std::vector<std::pair<double, double>> right, double delta) {
  HcsspModel h;
  h.events = {{"s", {{"left", {{1, 1.0}}}, {"right", {{2, 1.0}}}}},
              {"l", {{"go", {{3, 1.0}}}}},
              {"r", {{"go", {{3, 1.0}}}}},
              {"e", {}}};
  h.start_event = 0;
  h.end_event = 3;
  h.activities.push_back(testing::line_activity(h, "A", "L_s", "L_l", 0, 1, left));
  h.activities.push_back(testing::line_activity(h, "B", "L_s", "L_r", 0, 2, right));
  h.initial = {{*h.find_state("L_s"), 1.0}};
  h.constraints.push_back({{{0, 1}, {1, 1}}, delta});
  h.index();
  return h;
}

TEST(BruteForceCssp, ChainPicksSlow) {
  const CsspModel m = testing::make_ch1(5.0);
  const OracleResult r = brute_force_cssp(m);
  ASSERT_TRUE(r.optimum.has_value());
  EXPECT_EQ(*r.optimum, 10.0);
  EXPECT_EQ(r.policy->action(0), *m.find_action(0, "a_slow"));
  EXPECT_EQ(r.count, 2u);
}

TEST(BruteForceCssp, ChainTightBoundIsInfeasible) {
  const OracleResult r = brute_force_cssp(testing::make_ch1(0.5));
  EXPECT_FALSE(r.optimum.has_value());
  EXPECT_FALSE(r.policy.has_value());
  EXPECT_EQ(r.count, 2u);
}

TEST(BruteForceCssp, DeterministicGridIsManhattanDistance) {
  const CsspModel m = grid_cssp({.intended = 1.0});
  const OracleResult r = brute_force_cssp(m);
  ASSERT_TRUE(r.optimum.has_value());
  EXPECT_NEAR(*r.optimum, 4.0, 1e-12);
}

TEST(BruteForceCssp, NoisyGridMatchesValueIteration) {
  const CsspModel m = grid_cssp({});
  const OracleResult r = brute_force_cssp(m);
  ASSERT_TRUE(r.optimum.has_value());
  const std::vector<double> zero(1, 0.0);
  EXPECT_NEAR(*r.optimum, solve_weighted_ssp(m, zero).value.f, 1e-9);
}

TEST(BruteForceCssp, TooLarge) {
  const CsspModel m = grid_cssp({.w = 4, .h = 4, .goal = {3, 3}});
  try {
    brute_force_cssp(m, 1000);
    FAIL() << "expected TooLarge";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooLarge);
  }
}

TEST(EnumeratePolicies, VisitsEveryProperPolicyOnce) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const CsspModel m = testing::random_cssp(rng, {.max_states = 5});
    std::set<DeterministicPolicy> seen;
    enumerate_policies(m, [&](const DeterministicPolicy& p, const PolicyValue& v) {
      EXPECT_TRUE(seen.insert(p).second);
      const PolicyValue again = evaluate_policy(m, p);
      EXPECT_NEAR(v.f, again.f, 1e-9);
      EXPECT_EQ(restrict_to_reachable(m, p), p);
    });
    EXPECT_FALSE(seen.empty());
  }
}

TEST(BruteForceHcssp, WrappedChain) {
  const OracleResult r = brute_force_hcssp(testing::wrap_single_activity(testing::make_ch1(), 5.0));
  ASSERT_TRUE(r.optimum.has_value());
  EXPECT_NEAR(*r.optimum, 10.0, 1e-12);
  ASSERT_TRUE(r.solution.has_value());
  EXPECT_TRUE(r.solution->feasible);
}

TEST(BruteForceHcssp, InfeasibleBranchIsAvoided) {
  const HcsspModel h = two_branches({{1, 10}}, {{5, 0}}, 2.0);
  const OracleResult r = brute_force_hcssp(h);
  ASSERT_TRUE(r.optimum.has_value());
  EXPECT_NEAR(*r.optimum, 5.0, 1e-12);
  EXPECT_EQ(r.solution->rho[0], 1);
  // Loose budget: the cheap branch wins.
  EXPECT_NEAR(*brute_force_hcssp(two_branches({{1, 10}}, {{5, 0}}, 20.0)).optimum, 1.0, 1e-12);
}

TEST(BruteForceHcssp, AllBranchesInfeasible) {
  const OracleResult r = brute_force_hcssp(two_branches({{1, 10}}, {{5, 3}}, 2.0));
  EXPECT_FALSE(r.optimum.has_value());
  EXPECT_FALSE(r.solution.has_value());
}

TEST(BruteForceHcssp, AgreesWithFlatOracleOnWrappedInstances) {
  std::mt19937 rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    const CsspModel c = testing::random_cssp(rng);
    const OracleResult flat = brute_force_cssp(c);
    const OracleResult nested = brute_force_hcssp(testing::wrap_single_activity(c, c.bounds()[0]));
    ASSERT_EQ(flat.optimum.has_value(), nested.optimum.has_value()) << trial;
    if (flat.optimum) {
      EXPECT_NEAR(*flat.optimum, *nested.optimum, 1e-9) << trial;
    }
  }
}

TEST(BruteForceHcssp, PartitionRejectsExpensiveOptions) {
  const HcsspModel h = two_branches({{1, 10}, {3, 1}}, {{5, 0}}, 20.0);
  Partition q;
  q.keys = {{0, 1}, {1, 1}};
  q.lo = {0, 0};
  q.hi = {2, 20};
  const OracleResult r = brute_force_hcssp(h, {.partition = &q});
  ASSERT_TRUE(r.optimum.has_value());
  EXPECT_NEAR(*r.optimum, 3.0, 1e-12);
  // Allocation mode charges A its lower limit 3, which breaks a budget of 2.
  const HcsspModel tight = two_branches({{1, 10}, {3, 1}}, {{5, 0}}, 2.0);
  q.lo = {3, 0};
  q.hi = {3, 20};
  EXPECT_NEAR(*brute_force_hcssp(tight, {.partition = &q}).optimum, 3.0, 1e-12);
  EXPECT_NEAR(*brute_force_hcssp(tight, {.partition = &q, .allocation = true}).optimum, 5.0, 1e-12);
}

}  // namespace
}  // namespace hcssp
