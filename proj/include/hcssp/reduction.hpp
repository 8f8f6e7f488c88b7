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

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "hcssp/cssp_model.hpp"
#include "hcssp/hcssp_model.hpp"

namespace hcssp {

/// Estimated expected costs per activity, used to price procedural edges.
struct CostEstimates {
  std::vector<std::optional<double>> f_bar;       // per activity; +inf marks an unusable activity
  std::map<std::pair<int, int>, double> g_bar;    // (activity, cost index) -> estimate
};

/// Procedural planning problem as a C-SSP over events.
struct ProceduralCssp {
  CsspModel cssp;
  /// Choice index behind each local action of each event; choices that
  /// would activate an activity priced at +inf are left out.
  std::vector<std::vector<int>> choice_of_action;

  /// Full assignment; events the policy leaves unassigned get their first
  /// available choice.
  ProceduralPolicy to_procedural(const DeterministicPolicy& policy) const;
};

/// States are events, the start event is the initial state, the end event
/// the only goal, actions are choices. An edge carrying activity E costs
/// f_bar[E] in the primary and g_bar[E, I_j(E)] in secondary j.
/// Throws MissingEstimate.
ProceduralCssp procedural_to_cssp(const HcsspModel& model, const CostEstimates& est);

/// Upper bound (and informational lower limit) on one activity cost function.
struct BudgetBound {
  int cost_index = 1;
  double lower = 0.0;
  double upper = kInf;
};

struct ActivityCssp {
  CsspModel cssp;                // secondary i is the activity's cost_indices[i]
  std::vector<int> cost_indices;
  std::vector<double> lower;     // lower limits, metadata only
};

/// Activity planning problem for entry distribution `init` (global ids).
/// Cost functions without a bound are dropped. Throws SupportOutsideActivity.
ActivityCssp activity_to_cssp(const HcsspModel& model, int activity, const Distribution& init,
                              const std::vector<BudgetBound>& bounds);

}  // namespace hcssp
