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

#include "hcssp/json_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "hcssp/error.hpp"

namespace hcssp {

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(Errc::Parse, what); }

const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(where + ": missing field '" + key + "'");
  return obj.at(key);
}

double number(const Json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "Infinity") return kInf;
  }
  fail(where + ": expected a number");
}

std::string text(const Json& v, const std::string& where) {
  if (!v.is_string()) fail(where + ": expected a string");
  return v.get<std::string>();
}

// Reads the state-machine part shared by C-SSPs and activity fragments.
// `states` lists the state names; cost tables come from doc["costs"].
CsspModel read_machine(const Json& doc, const std::string& where, std::size_t num_secondary,
                       const std::vector<double>& bounds, const Json* initial) {
  CsspBuilder b(num_secondary);
  const Json& states = field(doc, "states", where);
  if (!states.is_array()) fail(where + ": 'states' must be an array");
  for (const Json& s : states) {
    const std::string name = text(s, where + ".states");
    if (b.find_state(name)) fail(where + ": duplicate state '" + name + "'");
    b.add_state(name);
  }
  auto id = [&](const std::string& name, const std::string& ctx) {
    auto s = b.find_state(name);
    if (!s) fail(ctx + ": unknown state '" + name + "'");
    return *s;
  };
  if (initial) {
    if (!initial->is_object()) fail(where + ": 'initial' must be an object");
    for (auto& [name, p] : initial->items()) b.set_initial(id(name, where + ".initial"), number(p, where + ".initial"));
  }
  const Json& goals = field(doc, "goals", where);
  if (!goals.is_array()) fail(where + ": 'goals' must be an array");
  for (const Json& g : goals) b.add_goal(id(text(g, where + ".goals"), where + ".goals"));

  const Json& costs = field(doc, "costs", where);
  if (!costs.is_array() || costs.size() != num_secondary + 1) {
    fail(where + ": 'costs' must list " + std::to_string(num_secondary + 1) + " cost tables");
  }
  const Json& actions = field(doc, "actions", where);
  const Json& transitions = field(doc, "transitions", where);
  if (!actions.is_object()) fail(where + ": 'actions' must be an object");
  for (const Json& s : states) {
    const std::string sname = s.get<std::string>();
    if (!actions.contains(sname)) continue;
    const StateId sid = id(sname, where);
    for (const Json& a : actions.at(sname)) {
      const std::string aname = text(a, where + ".actions");
      const std::string ctx = where + ".transitions['" + sname + "']['" + aname + "']";
      if (!transitions.contains(sname) || !transitions.at(sname).contains(aname)) fail(ctx + ": missing");
      const Json& row = transitions.at(sname).at(aname);
      if (!row.is_object()) fail(ctx + ": expected a successor -> probability object");
      std::vector<OutcomeSpec> outs;
      for (auto& [next, p] : row.items()) {
        OutcomeSpec o{id(next, ctx), number(p, ctx), std::vector<double>(num_secondary + 1, 0.0)};
        for (std::size_t i = 0; i <= num_secondary; ++i) {
          const Json& table = costs[i];
          if (!table.contains(sname) || !table.at(sname).contains(aname)) continue;
          const Json& c = table.at(sname).at(aname);
          const std::string cctx = where + ".costs[" + std::to_string(i) + "]['" + sname + "']['" + aname + "']";
          if (c.is_object()) {
            if (c.contains(next)) o.costs[i] = number(c.at(next), cctx);
          } else {
            o.costs[i] = number(c, cctx);
          }
        }
        outs.push_back(std::move(o));
      }
      b.add_action(sid, aname, std::move(outs));
    }
  }
  b.set_bounds(bounds);
  try {
    return b.build();
  } catch (const Error& e) {
    fail(where + ": " + e.what());
  }
}

OrderedJson machine_to_json(const CsspModel& m, std::size_t num_tables) {
  OrderedJson out;
  out["states"] = m.state_names();
  OrderedJson goals = OrderedJson::array();
  for (StateId g : m.goals()) goals.push_back(m.state_name(g));
  out["goals"] = goals;
  OrderedJson actions = OrderedJson::object(), transitions = OrderedJson::object();
  std::vector<OrderedJson> costs(num_tables, OrderedJson::object());
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    const auto sid = static_cast<StateId>(s);
    if (m.num_actions(sid) == 0) continue;
    const std::string& sname = m.state_name(sid);
    OrderedJson names = OrderedJson::array();
    for (std::size_t a = 0; a < m.num_actions(sid); ++a) {
      const int ai = static_cast<int>(a);
      const std::string& aname = m.action_name(sid, ai);
      names.push_back(aname);
      OrderedJson row = OrderedJson::object();
      for (const Outcome& o : m.outcomes(sid, ai)) row[m.state_name(o.next)] = o.prob;
      transitions[sname][aname] = row;
      for (std::size_t i = 0; i < num_tables; ++i) {
        const auto c = m.costs(i, sid, ai);
        const bool uniform = std::all_of(c.begin(), c.end(), [&](double x) { return x == c[0]; });
        if (uniform) {
          if (c.empty() || c[0] == 0.0) continue;
          costs[i][sname][aname] = c[0];
        } else {
          OrderedJson per = OrderedJson::object();
          const auto outs = m.outcomes(sid, ai);
          for (std::size_t k = 0; k < outs.size(); ++k) {
            if (c[k] != 0.0) per[m.state_name(outs[k].next)] = c[k];
          }
          costs[i][sname][aname] = per;
        }
      }
    }
    actions[sname] = names;
  }
  out["actions"] = actions;
  out["transitions"] = transitions;
  out["costs"] = costs;
  return out;
}

}  // namespace

OrderedJson number_to_json(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  return x;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    fail("'" + path + "' is not valid JSON: " + e.what());
  }
}

CsspModel cssp_from_json(const Json& doc) {
  std::vector<double> bounds;
  if (doc.contains("bounds")) {
    for (const Json& b : doc.at("bounds")) bounds.push_back(number(b, "bounds"));
  }
  return read_machine(doc, "cssp", bounds.size(), bounds, &field(doc, "initial", "cssp"));
}

OrderedJson cssp_to_json(const CsspModel& model) {
  OrderedJson out = machine_to_json(model, model.num_cost_functions());
  OrderedJson initial = OrderedJson::object();
  for (auto [s, p] : model.initial_support()) initial[model.state_name(s)] = p;
  OrderedJson result;
  result["states"] = out["states"];
  result["initial"] = initial;
  result["goals"] = out["goals"];
  result["actions"] = out["actions"];
  result["transitions"] = out["transitions"];
  result["costs"] = out["costs"];
  OrderedJson bounds = OrderedJson::array();
  for (double b : model.bounds()) bounds.push_back(number_to_json(b));
  result["bounds"] = bounds;
  return result;
}

HcsspModel hcssp_from_json(const Json& doc) {
  HcsspModel m;
  std::map<std::string, StateId> state_id;
  for (const Json& s : field(doc, "states", "hcssp")) {
    const std::string name = text(s, "hcssp.states");
    if (!state_id.emplace(name, static_cast<StateId>(m.states.size())).second) {
      fail("hcssp: duplicate state '" + name + "'");
    }
    m.states.push_back(name);
  }
  for (auto& [name, p] : field(doc, "initial", "hcssp").items()) {
    auto it = state_id.find(name);
    if (it == state_id.end()) fail("hcssp.initial: unknown state '" + name + "'");
    m.initial.emplace_back(it->second, number(p, "hcssp.initial"));
  }
  std::sort(m.initial.begin(), m.initial.end());

  std::map<std::string, EventId> event_id;
  for (const Json& e : field(doc, "events", "hcssp")) {
    const std::string name = text(e, "hcssp.events");
    if (!event_id.emplace(name, static_cast<EventId>(m.events.size())).second) {
      fail("hcssp: duplicate event '" + name + "'");
    }
    m.events.push_back({name, {}});
  }
  auto event = [&](const Json& v, const std::string& ctx) {
    const std::string name = text(v, ctx);
    auto it = event_id.find(name);
    if (it == event_id.end()) fail(ctx + ": unknown event '" + name + "'");
    return it->second;
  };
  m.start_event = event(field(doc, "start_event", "hcssp"), "hcssp.start_event");
  m.end_event = event(field(doc, "end_event", "hcssp"), "hcssp.end_event");

  const Json& choices = field(doc, "choices", "hcssp");
  const Json& rows = field(doc, "event_transitions", "hcssp");
  for (auto& [ename, domain] : choices.items()) {
    auto it = event_id.find(ename);
    if (it == event_id.end()) fail("hcssp.choices: unknown event '" + ename + "'");
    Event& ev = m.events[it->second];
    for (const Json& c : domain) {
      Choice choice{text(c, "hcssp.choices"), {}};
      const std::string ctx = "hcssp.event_transitions['" + ename + "']['" + choice.name + "']";
      if (!rows.contains(ename) || !rows.at(ename).contains(choice.name)) fail(ctx + ": missing");
      for (auto& [next, p] : rows.at(ename).at(choice.name).items()) {
        choice.next.emplace_back(event(Json(next), ctx), number(p, ctx));
      }
      ev.choices.push_back(std::move(choice));
    }
  }

  std::map<std::string, int> activity_id;
  for (const Json& a : field(doc, "activities", "hcssp")) {
    Activity act;
    act.name = text(field(a, "name", "hcssp.activities"), "hcssp.activities.name");
    const std::string where = "activity '" + act.name + "'";
    if (!activity_id.emplace(act.name, static_cast<int>(m.activities.size())).second) {
      fail("hcssp: duplicate activity '" + act.name + "'");
    }
    act.start_event = event(field(a, "start_event", where), where + ".start_event");
    act.end_event = event(field(a, "end_event", where), where + ".end_event");
    const Json& costs = field(a, "costs", where);
    if (!costs.is_array() || costs.empty()) fail(where + ": 'costs' must be a nonempty array");
    const std::size_t n2 = costs.size() - 1;
    act.model = read_machine(a, where, n2, std::vector<double>(n2, kInf), nullptr);
    for (const std::string& s : act.model.state_names()) {
      auto it = state_id.find(s);
      if (it == state_id.end()) fail(where + ": state '" + s + "' is not in the state universe");
      act.global_state.push_back(it->second);
    }
    m.activities.push_back(std::move(act));
  }

  if (doc.contains("constraints")) {
    for (const Json& c : doc.at("constraints")) {
      Constraint con;
      con.bound = number(field(c, "bound", "hcssp.constraints"), "hcssp.constraints.bound");
      const Json* index = c.contains("cost_index") ? &c.at("cost_index") : nullptr;
      for (const Json& a : field(c, "activities", "hcssp.constraints")) {
        const std::string name = text(a, "hcssp.constraints.activities");
        auto it = activity_id.find(name);
        if (it == activity_id.end()) fail("hcssp.constraints: unknown activity '" + name + "'");
        int idx = 1;
        if (index && index->is_number_integer()) {
          idx = index->get<int>();
        } else if (index && index->is_object() && index->contains(name)) {
          idx = index->at(name).get<int>();
        }
        con.terms.push_back({it->second, idx});
      }
      m.constraints.push_back(std::move(con));
    }
  }
  m.index();
  return m;
}

OrderedJson hcssp_to_json(const HcsspModel& model) {
  OrderedJson out;
  out["states"] = model.states;
  OrderedJson initial = OrderedJson::object();
  for (auto [s, p] : model.initial) initial[model.states[s]] = p;
  out["initial"] = initial;
  OrderedJson events = OrderedJson::array();
  for (const Event& e : model.events) events.push_back(e.name);
  out["events"] = events;
  out["start_event"] = model.events[model.start_event].name;
  out["end_event"] = model.events[model.end_event].name;
  OrderedJson choices = OrderedJson::object(), rows = OrderedJson::object();
  for (const Event& e : model.events) {
    if (e.choices.empty()) continue;
    OrderedJson domain = OrderedJson::array();
    for (const Choice& c : e.choices) {
      domain.push_back(c.name);
      OrderedJson row = OrderedJson::object();
      for (auto [next, p] : c.next) row[model.events[next].name] = p;
      rows[e.name][c.name] = row;
    }
    choices[e.name] = domain;
  }
  out["choices"] = choices;
  out["event_transitions"] = rows;
  OrderedJson activities = OrderedJson::array();
  for (const Activity& a : model.activities) {
    OrderedJson act;
    act["name"] = a.name;
    act["start_event"] = model.events[a.start_event].name;
    act["end_event"] = model.events[a.end_event].name;
    const OrderedJson machine = machine_to_json(a.model, a.model.num_cost_functions());
    for (auto& [k, v] : machine.items()) act[k] = v;
    activities.push_back(act);
  }
  out["activities"] = activities;
  OrderedJson constraints = OrderedJson::array();
  for (const Constraint& c : model.constraints) {
    OrderedJson con;
    OrderedJson names = OrderedJson::array(), index = OrderedJson::object();
    for (const ConstraintTerm& t : c.terms) {
      names.push_back(model.activities[t.activity].name);
      index[model.activities[t.activity].name] = t.cost_index;
    }
    con["activities"] = names;
    con["cost_index"] = index;
    con["bound"] = number_to_json(c.bound);
    constraints.push_back(con);
  }
  out["constraints"] = constraints;
  return out;
}

EvacuationSpec evacuation_spec_from_json(const Json& doc) {
  EvacuationSpec spec;
  auto cell = [](const Json& v, const std::string& ctx) {
    return GridCell{static_cast<int>(number(field(v, "x", ctx), ctx)), static_cast<int>(number(field(v, "y", ctx), ctx))};
  };
  for (const Json& r : field(doc, "rooms", "spec")) {
    spec.rooms.push_back({text(field(r, "id", "spec.rooms"), "spec.rooms.id"),
                          static_cast<int>(number(field(r, "w", "spec.rooms"), "spec.rooms.w")),
                          static_cast<int>(number(field(r, "h", "spec.rooms"), "spec.rooms.h"))});
  }
  if (doc.contains("connectors")) {
    std::size_t i = 0;
    for (const Json& c : doc.at("connectors")) {
      EvacConnector con;
      con.from = text(field(c, "from", "spec.connectors"), "spec.connectors.from");
      con.to = text(field(c, "to", "spec.connectors"), "spec.connectors.to");
      const std::string kind = c.contains("kind") ? text(c.at("kind"), "spec.connectors.kind") : "door";
      if (kind != "door" && kind != "hallway") fail("spec.connectors: kind must be 'door' or 'hallway'");
      con.door = kind == "door";
      con.lock_prob = c.contains("lock_prob") ? number(c.at("lock_prob"), "spec.connectors.lock_prob")
                                              : (con.door ? 0.1 : 0.0);
      con.id = c.contains("id") ? text(c.at("id"), "spec.connectors.id")
                                : kind + std::to_string(++i);
      if (c.contains("from_cell")) con.from_cell = cell(c.at("from_cell"), "spec.connectors.from_cell");
      if (c.contains("to_cell")) con.to_cell = cell(c.at("to_cell"), "spec.connectors.to_cell");
      spec.connectors.push_back(std::move(con));
    }
  }
  if (doc.contains("hazards")) {
    for (const Json& h : doc.at("hazards")) {
      EvacHazard hz;
      hz.room = text(field(h, "room", "spec.hazards"), "spec.hazards.room");
      hz.cell = cell(h, "spec.hazards");
      if (h.contains("damage")) hz.damage = number(h.at("damage"), "spec.hazards.damage");
      spec.hazards.push_back(std::move(hz));
    }
  }
  const Json& start = field(doc, "start", "spec");
  spec.start_room = text(field(start, "room", "spec.start"), "spec.start.room");
  spec.start = cell(start, "spec.start");
  const Json& exit = field(doc, "exit", "spec");
  spec.exit_room = text(field(exit, "room", "spec.exit"), "spec.exit.room");
  spec.exit = cell(exit, "spec.exit");
  spec.delta = number(field(doc, "delta", "spec"), "spec.delta");
  return spec;
}

OrderedJson policy_to_json(const CsspModel& model, const DeterministicPolicy& policy) {
  OrderedJson out = OrderedJson::object();
  for (std::size_t s = 0; s < policy.size(); ++s) {
    const int a = policy.action(static_cast<StateId>(s));
    if (a >= 0) out[model.state_name(static_cast<StateId>(s))] = model.action_name(static_cast<StateId>(s), a);
  }
  return out;
}

OrderedJson solution_to_json(const HcsspModel& model, const HierarchicalSolution& sol, double alpha,
                             double beta) {
  OrderedJson out;
  OrderedJson procedural = OrderedJson::object();
  for (std::size_t t = 0; t < model.events.size(); ++t) {
    const Event& e = model.events[t];
    if (e.choices.empty() || t >= sol.rho.size() || sol.rho[t] < 0) continue;
    procedural[e.name] = e.choices[sol.rho[t]].name;
  }
  out["procedural"] = procedural;
  OrderedJson activities = OrderedJson::object();
  for (const auto& [e, policy] : sol.gamma) {
    activities[model.activities[e].name] = policy_to_json(model.activities[e].model, policy);
  }
  out["activities"] = activities;
  out["objective"] = number_to_json(sol.objective);
  OrderedJson values = OrderedJson::array();
  for (double v : sol.constraint_values) values.push_back(number_to_json(v));
  out["constraint_values"] = values;
  out["alpha"] = number_to_json(alpha);
  out["beta"] = number_to_json(beta);
  return out;
}

}  // namespace hcssp
