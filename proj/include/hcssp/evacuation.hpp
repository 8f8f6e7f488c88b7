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

#include <optional>
#include <string>
#include <vector>

#include "hcssp/hcssp_model.hpp"

namespace hcssp {

struct GridCell {
  int x = 0;
  int y = 0;
  auto operator<=>(const GridCell&) const = default;
};

struct EvacRoom {
  std::string id;
  int w = 1;
  int h = 1;
};

/// Doors may be locked; hallways are always clear. The passage sits outside
/// the boundary cells `from_cell` (in room `from`) and `to_cell` (in `to`).
struct EvacConnector {
  std::string id;
  std::string from;
  std::string to;
  bool door = true;
  double lock_prob = 0.0;
  std::optional<GridCell> from_cell;  // default: middle of the right wall
  std::optional<GridCell> to_cell;    // default: middle of the left wall
};

struct EvacHazard {
  std::string room;
  GridCell cell;
  double damage = 50.0;
};

struct EvacuationSpec {
  std::vector<EvacRoom> rooms;
  std::vector<EvacConnector> connectors;
  std::vector<EvacHazard> hazards;
  std::string start_room;
  GridCell start;
  std::string exit_room;
  GridCell exit;
  double delta = 0.0;
};

inline constexpr double kIntendedMoveProb = 0.85;
inline constexpr double kSlipProb = 0.075;

/// Every issue with the spec, each naming its location; empty if valid.
std::vector<std::string> validate_evacuation_spec(const EvacuationSpec& spec);

/// Unfolds the room graph into an HC-SSP: one decision event per (landmark,
/// visited rooms, known locked doors) path node, one grid activity per move
/// between landmarks, door outcomes as uncontrollable events. A door whose
/// locked branch has no onward route gets a roundabout branch that enters
/// the next room anyway. Throws InvalidSpec.
HcsspModel build_evacuation(const EvacuationSpec& spec);

}  // namespace hcssp
