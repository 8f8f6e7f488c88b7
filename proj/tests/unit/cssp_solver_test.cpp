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

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "hcssp/cssp_solver.hpp"
#include "hcssp/error.hpp"
#include "hcssp/oracle.hpp"
#include "instances.hpp"

namespace hcssp {
namespace {

using testing::make_ch1;

TEST(SolveWeightedSsp, ChainAtZeroPicksFast) {
  const CsspModel m = make_ch1();
  const std::vector<double> lambda{0.0};
  const WeightedSolution s = solve_weighted_ssp(m, lambda);
  EXPECT_EQ(s.policy.action(0), *m.find_action(0, "a_fast"));
  EXPECT_NEAR(s.scalarized, 1.0, 1e-9);
}

TEST(SolveWeightedSsp, ChainAtTwoPicksSlow) {
  const CsspModel m = make_ch1();
  const std::vector<double> lambda{2.0};
  const WeightedSolution s = solve_weighted_ssp(m, lambda);
  EXPECT_EQ(s.policy.action(0), *m.find_action(0, "a_slow"));
  EXPECT_NEAR(s.scalarized, 2.0, 1e-9);
}

TEST(SolveWeightedSsp, NoProperPolicyThrows) {
  CsspBuilder b(0);
  b.add_state("s0");
  b.add_state("g");
  b.set_initial(0, 1.0);
  b.add_goal(1);
  b.add_action(0, "stay", {{0, 1.0, {1.0}}});
  b.set_bounds({});
  try {
    solve_weighted_ssp(b.build(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoProperPolicy);
  }
}

// 4-state random SSPs: the solver's value equals the brute-force minimum.
TEST(SolveWeightedSsp, MatchesBruteForceOnFourStates) {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const CsspModel m = testing::random_cssp(rng, {.min_states = 4, .max_states = 4});
    const std::vector<double> lambda{0.3};
    double best = kInf;
    enumerate_policies(m, [&](const DeterministicPolicy&, const PolicyValue& v) {
      best = std::min(best, lagrangian(v.f, v.g, lambda));
    });
    const WeightedSolution s = solve_weighted_ssp(m, lambda);
    EXPECT_NEAR(s.scalarized, best, 1e-6) << "trial " << trial;
    const PolicyValue v = evaluate_policy(m, s.policy);
    EXPECT_NEAR(lagrangian(v.f, v.g, lambda), s.scalarized, 1e-9);
  }
}

TEST(MinExpectedCost, MatchesBruteForceMinimum) {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const CsspModel m = testing::random_cssp(rng, {.num_secondary = 2});
    std::vector<double> least(3, kInf);
    enumerate_policies(m, [&](const DeterministicPolicy&, const PolicyValue& v) {
      least[0] = std::min(least[0], v.f);
      for (std::size_t i = 0; i < 2; ++i) least[i + 1] = std::min(least[i + 1], v.raw_g[i]);
    });
    const WeightedSspSolver solver(m);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto got = solver.min_expected_cost(i);
      ASSERT_TRUE(got.has_value());
      EXPECT_NEAR(*got, least[i], 1e-9 * std::max(1.0, least[i])) << "trial " << trial << " index " << i;
    }
  }
}

TEST(MinExpectedCost, ZeroCostLoopDoesNotHideTheExitCost) {
  // Looping at s0 is free in C_1 but never reaches the goal; every proper
  // policy pays the hazard.
  CsspBuilder b(1);
  b.add_state("s0");
  b.add_state("g");
  b.set_initial(0, 1.0);
  b.add_goal(1);
  b.add_action(0, "wait", {{0, 1.0, {1.0, 0.0}}});
  b.add_action(0, "cross", {{1, 1.0, {1.0, 50.0}}});
  b.set_bounds({10.0});
  const CsspModel m = b.build();
  EXPECT_DOUBLE_EQ(*WeightedSspSolver(m).min_expected_cost(1), 50.0);
  EXPECT_TRUE(bounds_unattainable(WeightedSspSolver(m)));
}

TEST(DualAscent, ChainMeetsAtOne) {
  const DualState d = dual_ascent(make_ch1());
  ASSERT_EQ(d.lambda_star.size(), 1u);
  EXPECT_NEAR(d.lambda_star[0], 1.0, 1e-6);
  EXPECT_NEAR(d.dual_value, 6.0, 1e-6);
  const int a = d.best_dual.policy.action(0);
  EXPECT_TRUE(a == 0 || a == 1);
  EXPECT_NEAR(d.best_dual.lagrangian, d.dual_value, 1e-7);
}

TEST(DualAscent, LooseBoundGivesZeroMultiplier) {
  const DualState d = dual_ascent(make_ch1(10.0));
  EXPECT_EQ(d.lambda_star[0], 0.0);
  EXPECT_NEAR(d.dual_value, 1.0, 1e-9);
}

TEST(DualAscent, NoSecondaryCosts) {
  const DualState d = dual_ascent(testing::make_self_loop());
  EXPECT_TRUE(d.lambda_star.empty());
  EXPECT_NEAR(d.dual_value, 2.0, 1e-9);
}

TEST(DualAscent, InfeasibleRelaxationThrows) {
  CsspBuilder b(1);
  b.add_state("s0");
  b.add_state("g");
  b.set_initial(0, 1.0);
  b.add_goal(1);
  b.add_action(0, "stay", {{0, 1.0, {1.0, 0.0}}});
  b.set_bounds({1.0});
  try {
    dual_ascent(b.build());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InfeasibleRelaxation);
  }
}

// The dual value is a maximum of L over a fine lambda grid (up to tolerance).
TEST(DualAscent, ChainBeatsLambdaGrid) {
  const CsspModel m = make_ch1();
  const DualState d = dual_ascent(m);
  for (double lam = 0.0; lam <= 5.0; lam += 0.01) {
    const std::vector<double> lambda{lam};
    const double l = std::min(1.0 + lam * 5.0, 10.0 - lam * 4.0);
    EXPECT_LE(l, d.dual_value + 1e-6) << lam;
  }
}

TEST(Stage2, ChainTiesAtSix) {
  const CsspModel m = make_ch1();
  const DualState d = dual_ascent(m);
  PolicyEnumerator e = stage2_enumerate(m, d);
  auto first = e.next();
  auto second = e.next();
  ASSERT_TRUE(first && second);
  EXPECT_NEAR(first->lagrangian, 6.0, 1e-6);
  EXPECT_NEAR(second->lagrangian, 6.0, 1e-6);
  EXPECT_NE(first->policy.action(0), second->policy.action(0));
  EXPECT_FALSE(e.next());
}

TEST(Stage2, ChainAtZeroOrdersFastThenSlow) {
  const CsspModel m = make_ch1(10.0);
  const DualState d = dual_ascent(m);
  PolicyEnumerator e = stage2_enumerate(m, d);
  auto first = e.next();
  auto second = e.next();
  ASSERT_TRUE(first && second);
  EXPECT_NEAR(first->lagrangian, 1.0, 1e-9);
  EXPECT_EQ(first->policy.action(0), *m.find_action(0, "a_fast"));
  EXPECT_NEAR(second->lagrangian, 10.0, 1e-9);
  EXPECT_FALSE(e.next());
}

TEST(Stage2, EightPolicyInstanceMatchesSortedBruteForce) {
  // Three transient states with two actions each, every assignment proper.
  CsspBuilder b(1);
  for (const char* s : {"s0", "s1", "s2", "g"}) b.add_state(s);
  b.set_initial(0, 0.5);
  b.set_initial(1, 0.3);
  b.set_initial(2, 0.2);
  b.add_goal(3);
  b.add_action(0, "x", {{1, 0.5, {1.0, 2.0}}, {3, 0.5, {2.0, 0.0}}});
  b.add_action(0, "y", {{3, 1.0, {4.0, 1.0}}});
  b.add_action(1, "x", {{2, 0.4, {1.5, 3.0}}, {3, 0.6, {1.0, 0.5}}});
  b.add_action(1, "y", {{3, 1.0, {3.0, 0.2}}});
  b.add_action(2, "x", {{3, 1.0, {0.5, 4.0}}});
  b.add_action(2, "y", {{3, 1.0, {2.5, 0.1}}});
  b.set_bounds({1.0});
  const CsspModel m = b.build();
  const DualState d = dual_ascent(m);
  std::vector<double> expected;
  std::size_t count = 0;
  enumerate_policies(m, [&](const DeterministicPolicy&, const PolicyValue& v) {
    expected.push_back(lagrangian(v.f, v.g, d.lambda_star));
    ++count;
  });
  ASSERT_EQ(count, 8u);
  std::sort(expected.begin(), expected.end());
  PolicyEnumerator e = stage2_enumerate(m, d);
  std::vector<double> got;
  std::set<DeterministicPolicy> seen;
  while (auto c = e.next()) {
    got.push_back(c->lagrangian);
    EXPECT_TRUE(seen.insert(c->policy).second);
  }
  ASSERT_EQ(got.size(), expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-9);
}

TEST(Stage2, RandomEnumerationIsSortedAndExhaustive) {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const CsspModel m = testing::random_cssp(rng, {.max_states = 6});
    std::vector<double> lambda{std::uniform_real_distribution<double>(0.0, 3.0)(rng)};
    std::vector<double> expected;
    enumerate_policies(m, [&](const DeterministicPolicy&, const PolicyValue& v) {
      expected.push_back(lagrangian(v.f, v.g, lambda));
    });
    std::sort(expected.begin(), expected.end());
    PolicyEnumerator e(m, lambda);
    std::vector<double> got;
    while (auto c = e.next()) got.push_back(c->lagrangian);
    ASSERT_EQ(got.size(), expected.size()) << "trial " << trial;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_NEAR(got[i], expected[i], 1e-7);
      if (i > 0) {
        EXPECT_GE(got[i], got[i - 1] - 1e-9);
      }
    }
  }
}

TEST(AnytimeSolve, ChainDualOnly) {
  const AnytimeResult r = anytime_solve(make_ch1(), {.l = 0});
  EXPECT_NEAR(r.lower_bound, 6.0, 1e-6);
  EXPECT_EQ(r.iterations_used, 0u);
  ASSERT_TRUE(r.incumbent.has_value());
  EXPECT_NEAR(r.incumbent->value.f, 10.0, 1e-9);
  EXPECT_NEAR(r.upper_bound, 10.0, 1e-9);
  EXPECT_EQ(r.status, AnytimeStatus::Feasible);
}

TEST(AnytimeSolve, ChainUnbounded) {
  const AnytimeResult r = anytime_solve(make_ch1());
  EXPECT_EQ(r.status, AnytimeStatus::Optimal);
  ASSERT_TRUE(r.incumbent.has_value());
  EXPECT_EQ(r.incumbent->policy.action(0), 1);
  EXPECT_NEAR(r.upper_bound, 10.0, 1e-9);
  EXPECT_NEAR(r.lower_bound, 10.0, 1e-9);
}

TEST(AnytimeSolve, ChainTightBoundIsInfeasible) {
  const AnytimeResult r = anytime_solve(make_ch1(0.5));
  EXPECT_EQ(r.status, AnytimeStatus::Infeasible);
  EXPECT_EQ(r.upper_bound, kInf);
  EXPECT_FALSE(r.incumbent.has_value());
}

TEST(AnytimeSolve, TraceCsvHeader) {
  const AnytimeResult r = anytime_solve(make_ch1());
  std::ostringstream os;
  write_trace_csv(os, r.trace);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "iter,lb,ub,feasible_found");
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), r.trace.size() + 1);
}

// Properties over random instances: weak duality at arbitrary lambda,
// optimality with unbounded l, monotone traces.
TEST(AnytimeProperty, WeakDualityConvergenceAndMonotonicity) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> lam(0.0, 10.0);
  int feasible = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const CsspModel m = testing::random_cssp(rng);
    const OracleResult oracle = brute_force_cssp(m);
    if (oracle.optimum) {
      ++feasible;
      const std::vector<double> lambda{lam(rng)};
      const WeightedSolution w = solve_weighted_ssp(m, lambda);
      EXPECT_LE(w.scalarized, *oracle.optimum + 1e-7);
    }
    for (std::size_t l : {std::size_t{0}, std::size_t{2}, kUnbounded}) {
      const AnytimeResult r = anytime_solve(m, {.l = l});
      for (std::size_t i = 0; i < r.trace.size(); ++i) {
        EXPECT_LE(r.trace[i].lb, r.trace[i].ub);
        if (i > 0) {
          EXPECT_GE(r.trace[i].lb, r.trace[i - 1].lb);
          EXPECT_LE(r.trace[i].ub, r.trace[i - 1].ub);
        }
      }
      if (r.incumbent) {
        for (double g : r.incumbent->value.g) EXPECT_LE(g, kFeasibilityTolerance);
      }
      if (oracle.optimum) {
        EXPECT_LE(r.lower_bound, *oracle.optimum + 1e-7);
        EXPECT_GE(r.upper_bound, *oracle.optimum - 1e-7);
      }
      if (l == kUnbounded) {
        if (oracle.optimum) {
          ASSERT_TRUE(r.incumbent.has_value()) << trial;
          EXPECT_NEAR(r.incumbent->value.f, *oracle.optimum, 1e-7);
          EXPECT_EQ(r.status, AnytimeStatus::Optimal);
        } else {
          EXPECT_EQ(r.status, AnytimeStatus::Infeasible);
        }
      }
    }
  }
  EXPECT_GT(feasible, 20);
}

TEST(AnytimeProperty, TwoSecondaryCostsConverge) {
  std::mt19937 rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    const CsspModel m = testing::random_cssp(rng, {.max_states = 6, .num_secondary = 2});
    const OracleResult oracle = brute_force_cssp(m);
    const AnytimeResult r = anytime_solve(m);
    if (oracle.optimum) {
      ASSERT_TRUE(r.incumbent.has_value());
      EXPECT_NEAR(r.incumbent->value.f, *oracle.optimum, 1e-7);
    } else {
      EXPECT_EQ(r.status, AnytimeStatus::Infeasible);
    }
  }
}

TEST(AnytimeSolve, IsDeterministic) {
  std::mt19937 rng(5);
  const CsspModel m = testing::random_cssp(rng, {.min_states = 8});
  const AnytimeResult a = anytime_solve(m);
  const AnytimeResult b = anytime_solve(m);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].lb, b.trace[i].lb);
    EXPECT_EQ(a.trace[i].ub, b.trace[i].ub);
  }
  EXPECT_EQ(a.incumbent.has_value(), b.incumbent.has_value());
  if (a.incumbent) {
    EXPECT_EQ(a.incumbent->policy, b.incumbent->policy);
  }
}

}  // namespace
}  // namespace hcssp
