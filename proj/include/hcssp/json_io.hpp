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

#include <string>

#include <json.hpp>

#include "hcssp/cssp_model.hpp"
#include "hcssp/evacuation.hpp"
#include "hcssp/hcssp_model.hpp"

namespace hcssp {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Reads a JSON file. Throws Parse.
Json load_json_file(const std::string& path);

/// C-SSP schema: states, initial, goals, actions, transitions, costs, bounds.
/// A cost table maps state -> action -> cost, where the cost is a number or
/// a successor -> cost object. Structural errors throw Parse; numeric ones
/// are left for validate_model.
CsspModel cssp_from_json(const Json& doc);
OrderedJson cssp_to_json(const CsspModel& model);

/// HC-SSP schema: the C-SSP state universe plus events, start_event,
/// end_event, choices, event_transitions, activities and constraints.
HcsspModel hcssp_from_json(const Json& doc);
OrderedJson hcssp_to_json(const HcsspModel& model);

EvacuationSpec evacuation_spec_from_json(const Json& doc);

OrderedJson policy_to_json(const CsspModel& model, const DeterministicPolicy& policy);

/// {procedural, activities, objective, constraint_values, alpha, beta}.
OrderedJson solution_to_json(const HcsspModel& model, const HierarchicalSolution& sol, double alpha,
                             double beta);

/// Finite numbers as numbers, infinities as the strings "inf" / "-inf".
OrderedJson number_to_json(double x);

}  // namespace hcssp
