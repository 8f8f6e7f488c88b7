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
#include <functional>
#include <optional>

#include "hcssp/budget_bnb.hpp"
#include "hcssp/cssp_model.hpp"
#include "hcssp/hcssp_model.hpp"

namespace hcssp {

inline constexpr std::size_t kOracleLimit = 1'000'000;

struct OracleResult {
  std::optional<double> optimum;                  // nullopt: infeasible
  std::optional<DeterministicPolicy> policy;      // C-SSP argmin
  std::optional<HierarchicalSolution> solution;   // HC-SSP argmin
  std::size_t count = 0;                          // candidates examined
};

/// Calls `visit` for every proper deterministic policy, each restricted to
/// its reachable states, in a fixed depth-first order. Throws
/// TooLarge when the action-set product over states reachable under some
/// policy exceeds `limit`.
void enumerate_policies(const CsspModel& model,
                        const std::function<void(const DeterministicPolicy&, const PolicyValue&)>& visit,
                        std::size_t limit = kOracleLimit);

/// Cheapest feasible deterministic policy by exhaustive enumeration.
OracleResult brute_force_cssp(const CsspModel& model, std::size_t limit = kOracleLimit);

struct HcsspOracleOptions {
  /// Rejects activity policies whose cost exceeds the partition's upper limit.
  const Partition* partition = nullptr;
  /// With a partition: charge each constrained cost at least its lower limit
  /// in the constraint, i.e. require an allocation inside the partition.
  bool allocation = false;
  std::size_t limit = kOracleLimit;
};

/// Best feasible hierarchical solution by enumerating procedural policies
/// and, per activated activity, the Pareto-optimal (f, g) policies of each
/// termination distribution. Throws TooLarge.
OracleResult brute_force_hcssp(const HcsspModel& model, const HcsspOracleOptions& options = {});

}  // namespace hcssp
