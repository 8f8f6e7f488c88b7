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

#include "hcssp/evacuation.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "hcssp/error.hpp"

namespace hcssp {

namespace {

constexpr std::array<int, 4> kDx = {0, 1, 0, -1};  // N E S W
constexpr std::array<int, 4> kDy = {-1, 0, 1, 0};
constexpr std::array<const char*, 4> kDirName = {"N", "E", "S", "W"};

GridCell default_from(const EvacRoom& r) { return {r.w - 1, r.h / 2}; }
GridCell default_to(const EvacRoom& r) { return {0, r.h / 2}; }

bool on_boundary(const EvacRoom& r, GridCell c) {
  const bool inside = c.x >= 0 && c.y >= 0 && c.x < r.w && c.y < r.h;
  return inside && (c.x == 0 || c.y == 0 || c.x == r.w - 1 || c.y == r.h - 1);
}

// Direction that leaves the room from boundary cell c.
int outward(const EvacRoom& r, GridCell c) {
  if (c.x == 0) return 3;
  if (c.x == r.w - 1) return 1;
  if (c.y == 0) return 0;
  return 2;
}

std::string cell_name(const std::string& room, GridCell c) {
  return room + ":" + std::to_string(c.x) + "," + std::to_string(c.y);
}

// A place an activity starts or ends at: a room cell or a connector.
struct Landmark {
  int connector = -1;  // -1 means `cell`
  GridCell cell;
  auto operator<=>(const Landmark&) const = default;
};

class Generator {
 public:
  explicit Generator(const EvacuationSpec& spec) : spec_(spec) {
    for (std::size_t i = 0; i < spec.rooms.size(); ++i) room_index_[spec.rooms[i].id] = static_cast<int>(i);
    for (const EvacHazard& h : spec.hazards) hazard_[{room_index_.at(h.room), h.cell}] += h.damage;
  }

  HcsspModel build() {
    Event end;
    end.name = "exit";
    model_.events.push_back(end);
    model_.end_event = 0;
    const int start_room = room_index_.at(spec_.start_room);
    const std::uint32_t visited = 1u << start_room;
    const EventId start = decision(start_room, Landmark{-1, spec_.start}, visited, 0);
    if (start < 0) throw Error(Errc::InvalidSpec, "no route from the start cell to the exit");
    model_.start_event = start;
    model_.initial = {{global(cell_name(spec_.start_room, spec_.start)), 1.0}};

    Constraint damage;
    damage.bound = spec_.delta;
    for (std::size_t e = 0; e < model_.activities.size(); ++e) damage.terms.push_back({static_cast<int>(e), 1});
    model_.constraints.push_back(std::move(damage));
    model_.index();
    return std::move(model_);
  }

 private:
  using DecisionKey = std::tuple<int, Landmark, std::uint32_t, std::uint64_t>;

  StateId global(const std::string& name) {
    auto [it, inserted] = global_index_.emplace(name, static_cast<StateId>(model_.states.size()));
    if (inserted) model_.states.push_back(name);
    return it->second;
  }

  std::string landmark_name(int room, const Landmark& l) const {
    if (l.connector >= 0) return spec_.connectors[l.connector].id;
    return cell_name(spec_.rooms[room].id, l.cell);
  }

  // Boundary cell of `room` that connector c attaches to.
  GridCell attach(int room, int c) const {
    const EvacConnector& con = spec_.connectors[c];
    if (room_index_.at(con.from) == room) return con.from_cell.value_or(default_from(spec_.rooms[room]));
    return con.to_cell.value_or(default_to(spec_.rooms[room]));
  }

  int other_room(int room, int c) const {
    const EvacConnector& con = spec_.connectors[c];
    const int a = room_index_.at(con.from), b = room_index_.at(con.to);
    return a == room ? b : a;
  }

  double damage(int room, GridCell c) const {
    auto it = hazard_.find({room, c});
    return it == hazard_.end() ? 0.0 : it->second;
  }

  // Grid SSP over one room from `from` to `to`.
  int activity(int room, const Landmark& from, const Landmark& to, EventId start, EventId end) {
    const EvacRoom& r = spec_.rooms[room];
    const auto key = std::make_tuple(room, from, to);
    auto cached = grids_.find(key);
    if (cached == grids_.end()) {
      CsspBuilder b(1);
      std::vector<StateId> globals;
      for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) {
          const std::string name = cell_name(r.id, {x, y});
          b.add_state(name);
          globals.push_back(global(name));
        }
      }
      std::vector<std::pair<int, StateId>> portals;  // connector -> local id
      for (const Landmark* l : {&from, &to}) {
        if (l->connector < 0) continue;
        const std::string name = spec_.connectors[l->connector].id;
        portals.emplace_back(l->connector, b.add_state(name));
        globals.push_back(global(name));
      }
      auto cell_id = [&](GridCell c) { return static_cast<StateId>(c.y * r.w + c.x); };
      auto local_of = [&](const Landmark& l) {
        if (l.connector < 0) return cell_id(l.cell);
        for (auto [c, id] : portals) {
          if (c == l.connector) return id;
        }
        return StateId{-1};
      };
      const StateId goal = local_of(to);
      b.add_goal(goal);
      b.set_initial(local_of(from), 1.0);
      b.set_bounds({kInf});

      auto successor = [&](GridCell c, int dir) -> StateId {
        const GridCell n{c.x + kDx[dir], c.y + kDy[dir]};
        if (n.x >= 0 && n.y >= 0 && n.x < r.w && n.y < r.h) return cell_id(n);
        for (auto [con, id] : portals) {
          if (attach(room, con) == c && outward(r, c) == dir) return id;
        }
        return cell_id(c);
      };
      auto cost_of = [&](StateId next) {
        if (next >= r.w * r.h) return 0.0;
        return damage(room, {next % r.w, next / r.w});
      };
      auto add = [&](StateId s, int dir, auto next_of) {
        std::map<StateId, double> dist;
        dist[next_of(dir)] += kIntendedMoveProb;
        dist[next_of((dir + 1) % 4)] += kSlipProb;
        dist[next_of((dir + 3) % 4)] += kSlipProb;
        std::vector<OutcomeSpec> outs;
        for (auto [next, p] : dist) outs.push_back({next, p, {1.0, cost_of(next)}});
        b.add_action(s, kDirName[dir], std::move(outs));
      };
      for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) {
          const GridCell c{x, y};
          if (cell_id(c) == goal) continue;
          for (int d = 0; d < 4; ++d) add(cell_id(c), d, [&](int dir) { return successor(c, dir); });
        }
      }
      for (auto [con, id] : portals) {
        if (id == goal) continue;
        const GridCell c = attach(room, con);
        const int inward = (outward(r, c) + 2) % 4;
        const StateId portal = id;
        for (int d = 0; d < 4; ++d) {
          add(portal, d, [&](int dir) { return dir == inward ? cell_id(c) : portal; });
        }
      }
      Activity proto;
      proto.model = b.build();
      proto.global_state = std::move(globals);
      cached = grids_.emplace(key, std::move(proto)).first;
    }
    Activity act = cached->second;
    act.name = r.id + ":" + landmark_name(room, from) + "->" + landmark_name(room, to) + "#" +
               std::to_string(model_.activities.size());
    act.start_event = start;
    act.end_event = end;
    model_.activities.push_back(std::move(act));
    activity_target_.push_back(to);
    return static_cast<int>(model_.activities.size()) - 1;
  }

  struct EventSignature {
    std::string name;
    Landmark from;
    std::vector<std::tuple<std::string, std::vector<std::pair<EventId, double>>, int, Landmark>> options;
    auto operator<=>(const EventSignature&) const = default;
  };

  struct PendingChoice {
    std::string name;
    std::vector<std::pair<EventId, double>> next;
    int room = -1;      // activity on the edge to next[0], if room >= 0
    Landmark to;
  };

  EventId emit(std::string name, const Landmark& from, std::vector<PendingChoice> pending) {
    // Events with the same place and the same options are one event.
    EventSignature sig{name, from, {}};
    for (const PendingChoice& pc : pending) sig.options.emplace_back(pc.name, pc.next, pc.room, pc.to);
    if (auto it = emitted_.find(sig); it != emitted_.end()) return it->second;
    const auto id = static_cast<EventId>(model_.events.size());
    emitted_.emplace(std::move(sig), id);
    Event ev;
    ev.name = "e" + std::to_string(id) + ":" + name;
    for (const PendingChoice& pc : pending) ev.choices.push_back({pc.name, pc.next});
    model_.events.push_back(std::move(ev));
    for (const PendingChoice& pc : pending) {
      if (pc.room >= 0) activity(pc.room, from, pc.to, id, pc.next.front().first);
    }
    return id;
  }

  EventId decision(int room, const Landmark& at, std::uint32_t visited, std::uint64_t locked) {
    const DecisionKey key{room, at, visited, locked};
    if (auto it = decisions_.find(key); it != decisions_.end()) return it->second;
    std::vector<PendingChoice> pending;
    if (room_index_.at(spec_.exit_room) == room && !(at.connector < 0 && at.cell == spec_.exit)) {
      pending.push_back({"go-to-exit", {{model_.end_event, 1.0}}, room, Landmark{-1, spec_.exit}});
    }
    for (std::size_t c = 0; c < spec_.connectors.size(); ++c) {
      const int ci = static_cast<int>(c);
      const EvacConnector& con = spec_.connectors[c];
      const int a = room_index_.at(con.from), b = room_index_.at(con.to);
      if (a != room && b != room) continue;
      if (at.connector == ci || (locked >> c) & 1u) continue;
      const int next_room = other_room(room, ci);
      if ((visited >> next_room) & 1u) continue;
      const Landmark portal{ci, {}};
      const EventId through = decision(next_room, portal, visited | (1u << next_room), locked);
      if (through < 0) continue;
      if (!con.door || con.lock_prob <= 0.0) {
        pending.push_back({"go-to-" + con.id, {{through, 1.0}}, room, portal});
        continue;
      }
      EventId blocked = decision(room, portal, visited, locked | (std::uint64_t{1} << c));
      if (blocked < 0) {
        blocked = roundabout(next_room, ci, visited | (1u << next_room), locked);
      }
      const EventId arrive = door_event(ci, room, through, blocked);
      pending.push_back({"go-to-" + con.id, {{arrive, 1.0}}, room, portal});
    }
    EventId id = -1;
    if (!pending.empty()) {
      id = emit("at " + landmark_name(room, at) + " in " + spec_.rooms[room].id, at, std::move(pending));
    }
    decisions_.emplace(key, id);
    return id;
  }

  // Door found locked with nowhere else to go: the robot still reaches the
  // far side by a detour outside the modelled rooms.
  EventId roundabout(int room, int c, std::uint32_t visited, std::uint64_t locked) {
    const auto key = std::make_tuple(room, c, visited, locked);
    if (auto it = roundabouts_.find(key); it != roundabouts_.end()) return it->second;
    const Landmark at{c, {}};
    // Same options as the open branch, on edges of their own.
    const EventId open = decision(room, at, visited, locked);
    std::vector<PendingChoice> pending;
    for (const Choice& ch : model_.events[open].choices) {
      PendingChoice pc{ch.name, ch.next, -1, {}};
      const int e = activity_on(open, ch.next.front().first);
      if (e >= 0) {
        pc.room = room;
        pc.to = activity_target_[e];
      }
      pending.push_back(std::move(pc));
    }
    const EventId id = emit("roundabout via " + spec_.connectors[c].id, at, std::move(pending));
    roundabouts_.emplace(key, id);
    return id;
  }

  EventId door_event(int c, int room, EventId open, EventId blocked) {
    const auto key = std::make_tuple(c, room, open, blocked);
    if (auto it = doors_.find(key); it != doors_.end()) return it->second;
    const double p = spec_.connectors[c].lock_prob;
    std::vector<PendingChoice> pending;
    pending.push_back({"try-door", {{open, 1.0 - p}, {blocked, p}}, -1, {}});
    const EventId id = emit("at " + spec_.connectors[c].id + " from " + spec_.rooms[room].id, {}, std::move(pending));
    doors_.emplace(key, id);
    return id;
  }

  int activity_on(EventId from, EventId to) const {
    for (std::size_t e = 0; e < model_.activities.size(); ++e) {
      if (model_.activities[e].start_event == from && model_.activities[e].end_event == to) {
        return static_cast<int>(e);
      }
    }
    return -1;
  }

  const EvacuationSpec& spec_;
  HcsspModel model_;
  std::map<std::string, int> room_index_;
  std::map<std::pair<int, GridCell>, double> hazard_;
  std::map<std::string, StateId> global_index_;
  std::map<std::tuple<int, Landmark, Landmark>, Activity> grids_;
  std::map<DecisionKey, EventId> decisions_;
  std::map<EventSignature, EventId> emitted_;
  std::map<std::tuple<int, int, std::uint32_t, std::uint64_t>, EventId> roundabouts_;
  std::map<std::tuple<int, int, EventId, EventId>, EventId> doors_;
  std::vector<Landmark> activity_target_;
};

}  // namespace

std::vector<std::string> validate_evacuation_spec(const EvacuationSpec& spec) {
  std::vector<std::string> issues;
  std::map<std::string, const EvacRoom*> rooms;
  if (spec.rooms.empty()) issues.emplace_back("spec has no rooms");
  if (spec.rooms.size() > 32) issues.emplace_back("at most 32 rooms are supported");
  if (spec.connectors.size() > 64) issues.emplace_back("at most 64 connectors are supported");
  for (const EvacRoom& r : spec.rooms) {
    if (r.w < 1 || r.h < 1) issues.push_back("room '" + r.id + "' has nonpositive size");
    if (!rooms.emplace(r.id, &r).second) issues.push_back("room id '" + r.id + "' is duplicated");
  }
  auto room = [&](const std::string& id) -> const EvacRoom* {
    auto it = rooms.find(id);
    return it == rooms.end() ? nullptr : it->second;
  };
  auto where = [](const std::string& id, GridCell c) {
    return "(" + id + ", " + std::to_string(c.x) + ", " + std::to_string(c.y) + ")";
  };
  std::set<std::string> ids;
  for (const EvacConnector& c : spec.connectors) {
    const std::string who = "connector '" + c.id + "'";
    if (!ids.insert(c.id).second) issues.push_back(who + " has a duplicated id");
    const EvacRoom* a = room(c.from);
    const EvacRoom* b = room(c.to);
    if (!a || !b) {
      issues.push_back(who + " links an unknown room");
      continue;
    }
    if (c.from == c.to) issues.push_back(who + " links room '" + c.from + "' to itself");
    if (!(c.lock_prob >= 0.0 && c.lock_prob < 1.0)) issues.push_back(who + " has lock_prob outside [0, 1)");
    const GridCell fc = c.from_cell.value_or(default_from(*a));
    const GridCell tc = c.to_cell.value_or(default_to(*b));
    if (!on_boundary(*a, fc)) issues.push_back(who + " endpoint " + where(c.from, fc) + " is not on the room boundary");
    if (!on_boundary(*b, tc)) issues.push_back(who + " endpoint " + where(c.to, tc) + " is not on the room boundary");
  }
  std::set<std::pair<std::string, GridCell>> hazards;
  for (const EvacHazard& h : spec.hazards) {
    const EvacRoom* r = room(h.room);
    if (!r) {
      issues.push_back("hazard in unknown room '" + h.room + "'");
      continue;
    }
    if (h.cell.x < 0 || h.cell.y < 0 || h.cell.x >= r->w || h.cell.y >= r->h) {
      issues.push_back("hazard " + where(h.room, h.cell) + " lies outside the room");
    }
    if (!(h.damage >= 0.0)) issues.push_back("hazard " + where(h.room, h.cell) + " has negative damage");
    hazards.insert({h.room, h.cell});
  }
  for (auto [label, id, cell] : {std::tuple{"start", spec.start_room, spec.start},
                                 std::tuple{"exit", spec.exit_room, spec.exit}}) {
    const EvacRoom* r = room(id);
    if (!r) {
      issues.push_back(std::string(label) + " names unknown room '" + id + "'");
      continue;
    }
    if (cell.x < 0 || cell.y < 0 || cell.x >= r->w || cell.y >= r->h) {
      issues.push_back(std::string(label) + " cell " + where(id, cell) + " lies outside the room");
    }
    if (hazards.count({id, cell})) issues.push_back(std::string(label) + " cell " + where(id, cell) + " is a hazard");
  }
  if (!(spec.delta >= 0.0)) issues.emplace_back("delta is negative");
  return issues;
}

HcsspModel build_evacuation(const EvacuationSpec& spec) {
  const auto issues = validate_evacuation_spec(spec);
  if (!issues.empty()) {
    std::ostringstream os;
    for (std::size_t i = 0; i < issues.size(); ++i) os << (i ? "; " : "") << issues[i];
    throw Error(Errc::InvalidSpec, os.str());
  }
  return Generator(spec).build();
}

}  // namespace hcssp
