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

#include <string>

#include "hcssp/budget_bnb.hpp"
#include "hcssp/cssp_solver.hpp"
#include "hcssp/error.hpp"
#include "hcssp/evacuation.hpp"
#include "hcssp/json_io.hpp"

namespace hcssp {
namespace {

EvacuationSpec one_room(int w, int h) {
  EvacuationSpec spec;
  spec.rooms = {{"A", w, h}};
  spec.start_room = "A";
  spec.start = {0, 0};
  spec.exit_room = "A";
  spec.exit = {w - 1, h - 1};
  spec.delta = 0.0;
  return spec;
}

EvacuationSpec two_rooms() {
  EvacuationSpec spec;
  spec.rooms = {{"A", 3, 3}, {"B", 3, 3}};
  spec.connectors = {{.id = "door1", .from = "A", .to = "B", .door = true, .lock_prob = 0.1}};
  spec.start_room = "A";
  spec.start = {0, 1};
  spec.exit_room = "B";
  spec.exit = {2, 1};
  spec.delta = 10.0;
  return spec;
}

double outcome_prob(const CsspModel& m, StateId s, int a, StateId next) {
  double p = 0.0;
  for (const Outcome& o : m.outcomes(s, a)) {
    if (o.next == next) p += o.prob;
  }
  return p;
}

TEST(Evacuation, OneRoomCollapsesToGridSsp) {
  const HcsspModel h = build_evacuation(one_room(3, 3));
  EXPECT_TRUE(validate_hcssp(h).empty());
  ASSERT_EQ(h.activities.size(), 1u);
  ASSERT_EQ(h.events[h.start_event].choices.size(), 1u);
  const CsspModel& grid = h.activities[0].model;
  EXPECT_EQ(grid.num_states(), 9u);
  const CsspModel unconstrained = grid.with_initial({{*grid.find_state("A:0,0"), 1.0}});
  const std::vector<double> zero(1, 0.0);
  const double steps = solve_weighted_ssp(unconstrained, zero).value.f;
  const BnbResult r = branch_and_bound(h, {.epsilon = 1e-9});
  ASSERT_TRUE(r.incumbent.has_value());
  EXPECT_NEAR(r.incumbent->objective, steps, 1e-9);
  // Four intended moves, each landing with probability 0.85 or worse.
  EXPECT_GT(steps, 4.0);
}

TEST(Evacuation, MoveModelAndWallBumps) {
  const HcsspModel h = build_evacuation(one_room(3, 3));
  const CsspModel& m = h.activities[0].model;
  const StateId centre = *m.find_state("A:1,1");
  const StateId corner = *m.find_state("A:0,0");
  const int east = *m.find_action(centre, "E");
  EXPECT_NEAR(outcome_prob(m, centre, east, *m.find_state("A:2,1")), 0.85, 1e-12);
  EXPECT_NEAR(outcome_prob(m, centre, east, *m.find_state("A:1,0")), 0.075, 1e-12);
  EXPECT_NEAR(outcome_prob(m, centre, east, *m.find_state("A:1,2")), 0.075, 1e-12);
  const int north = *m.find_action(corner, "N");
  EXPECT_NEAR(outcome_prob(m, corner, north, corner), 0.925, 1e-12);
  EXPECT_NEAR(outcome_prob(m, corner, north, *m.find_state("A:1,0")), 0.075, 1e-12);
  for (double c : m.costs(0, centre, east)) EXPECT_EQ(c, 1.0);
}

TEST(Evacuation, HazardChargedOnEntry) {
  EvacuationSpec spec = one_room(3, 3);
  spec.hazards = {{"A", {1, 1}, 50.0}};
  const HcsspModel h = build_evacuation(spec);
  const CsspModel& m = h.activities[0].model;
  const StateId left = *m.find_state("A:0,1");
  const StateId centre = *m.find_state("A:1,1");
  const int east = *m.find_action(left, "E");
  const auto outs = m.outcomes(left, east);
  const auto damage = m.costs(1, left, east);
  for (std::size_t k = 0; k < outs.size(); ++k) {
    EXPECT_EQ(damage[k], outs[k].next == centre ? 50.0 : 0.0);
  }
  // Leaving the hazard costs nothing extra.
  const int west = *m.find_action(centre, "W");
  const auto from_outs = m.outcomes(centre, west);
  const auto from_damage = m.costs(1, centre, west);
  for (std::size_t k = 0; k < from_outs.size(); ++k) {
    EXPECT_EQ(from_damage[k], from_outs[k].next == centre ? 50.0 : 0.0);
  }
}

TEST(Evacuation, TwoRoomsOneDoorGivesThreeActivities) {
  const HcsspModel h = build_evacuation(two_rooms());
  EXPECT_TRUE(validate_hcssp(h).empty());
  ASSERT_EQ(h.activities.size(), 3u);
  int roundabouts = 0;
  for (const Event& e : h.events) {
    if (e.name.find("roundabout") != std::string::npos) ++roundabouts;
  }
  EXPECT_EQ(roundabouts, 1);
  // The door is a chance event: open 0.9, locked 0.1.
  bool door_seen = false;
  for (const Event& e : h.events) {
    if (e.choices.size() != 1 || e.choices[0].next.size() != 2) continue;
    door_seen = true;
    EXPECT_NEAR(e.choices[0].next[0].second, 0.9, 1e-12);
    EXPECT_NEAR(e.choices[0].next[1].second, 0.1, 1e-12);
  }
  EXPECT_TRUE(door_seen);
  ASSERT_EQ(h.constraints.size(), 1u);
  EXPECT_EQ(h.constraints[0].terms.size(), 3u);
  EXPECT_EQ(h.constraints[0].bound, 10.0);

  double total = 0.0;
  for (int e = 0; e < 3; ++e) total += min_activity_likelihood(h, e);
  EXPECT_NEAR(total, 1.0 + 0.9 + 0.1, 1e-12);
}

TEST(Evacuation, ChainedDoorsMultiplyLikelihood) {
  EvacuationSpec spec;
  spec.rooms = {{"A", 3, 3}, {"B", 3, 3}, {"C", 3, 3}};
  spec.connectors = {{.id = "door1", .from = "A", .to = "B", .lock_prob = 0.1},
                     {.id = "door2", .from = "B", .to = "C", .lock_prob = 0.1}};
  spec.start_room = "A";
  spec.start = {0, 1};
  spec.exit_room = "C";
  spec.exit = {2, 1};
  const HcsspModel h = build_evacuation(spec);
  EXPECT_TRUE(validate_hcssp(h).empty());
  // Reaching the exit through both open doors happens with probability 0.81.
  bool found = false;
  for (std::size_t e = 0; e < h.activities.size(); ++e) {
    const Activity& act = h.activities[e];
    if (act.name.rfind("C:door2->", 0) != 0) continue;
    if (h.events[act.start_event].name.find("roundabout") != std::string::npos) continue;
    const double lk = min_activity_likelihood(h, static_cast<int>(e));
    EXPECT_TRUE(std::abs(lk - 0.9) < 1e-12 || std::abs(lk - 0.81) < 1e-12) << act.name << " " << lk;
    found = true;
  }
  EXPECT_TRUE(found);
  const BnbResult r = branch_and_bound(h, {.epsilon = 1e-6});
  ASSERT_TRUE(r.incumbent.has_value());
  EXPECT_TRUE(r.incumbent->feasible);
}

TEST(Evacuation, InvalidSpecNamesLocation) {
  EvacuationSpec spec = two_rooms();
  spec.connectors[0].from_cell = GridCell{1, 1};
  spec.hazards = {{"A", {0, 1}, 50.0}};
  const auto issues = validate_evacuation_spec(spec);
  ASSERT_EQ(issues.size(), 2u);
  EXPECT_NE(issues[0].find("(A, 1, 1)"), std::string::npos) << issues[0];
  EXPECT_NE(issues[1].find("start cell (A, 0, 1) is a hazard"), std::string::npos) << issues[1];
  try {
    build_evacuation(spec);
    FAIL() << "expected InvalidSpec";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidSpec);
  }
}

TEST(Evacuation, UnknownRoomAndBadLockProbability) {
  EvacuationSpec spec = two_rooms();
  spec.connectors[0].lock_prob = 1.0;
  spec.exit_room = "Z";
  const auto issues = validate_evacuation_spec(spec);
  ASSERT_EQ(issues.size(), 2u);
  EXPECT_NE(issues[0].find("lock_prob"), std::string::npos);
  EXPECT_NE(issues[1].find("unknown room 'Z'"), std::string::npos);
}

TEST(Evacuation, CanonicalSixRoomSpec) {
  const EvacuationSpec spec = evacuation_spec_from_json(load_json_file(HCSSP_DATA_DIR "/evac_six_rooms.json"));
  EXPECT_TRUE(validate_evacuation_spec(spec).empty());
  ASSERT_EQ(spec.rooms.size(), 6u);
  int cells = 0;
  for (const EvacRoom& r : spec.rooms) cells += r.w * r.h;
  EXPECT_NEAR(cells, 18644, 200);
  const HcsspModel h = build_evacuation(spec);
  EXPECT_TRUE(validate_hcssp(h).empty());
  const Event& start = h.events[h.start_event];
  ASSERT_EQ(start.choices.size(), 2u);
  EXPECT_EQ(start.choices[0].name, "go-to-door1");
  EXPECT_EQ(start.choices[1].name, "go-to-hallway1");
  // Door outcomes are the only chance branches.
  for (const Event& e : h.events) {
    for (const Choice& c : e.choices) {
      if (c.next.size() > 1) {
        EXPECT_EQ(c.name, "try-door");
        EXPECT_NEAR(c.next[1].second, 0.1, 1e-12);
      }
    }
  }
}

}  // namespace
}  // namespace hcssp
