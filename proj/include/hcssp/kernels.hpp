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

// Data-parallel sweep kernels used by the iterative solvers. Each kernel has
// a serial reference and an OpenMP version; both are Jacobi-style (read the
// old vector, write the new one), so they produce bit-identical results.

#include <cstddef>
#include <cstdint>
#include <span>

#include "hcssp/cssp_model.hpp"

namespace hcssp::kernels {

/// Sizes at or above this use the OpenMP kernels in the dispatching overloads.
inline constexpr std::size_t kParallelThreshold = 2048;

/// Incoming-edge (pull) view of a fixed Markov chain over transient states
/// 0..n-1: predecessors of state i are in_from[in_begin[i] .. in_begin[i+1]).
struct ChainView {
  std::span<const std::size_t> in_begin;
  std::span<const std::int32_t> in_from;
  std::span<const double> in_prob;

  std::size_t size() const { return in_begin.empty() ? 0 : in_begin.size() - 1; }
};

/// x_new = mu0 + P^T x_old; returns max |x_new - x_old|.
double occupancy_sweep_serial(const ChainView& chain, std::span<const double> mu0,
                              std::span<const double> x_old, std::span<double> x_new);
double occupancy_sweep_parallel(const ChainView& chain, std::span<const double> mu0,
                                std::span<const double> x_old, std::span<double> x_new);
double occupancy_sweep(const ChainView& chain, std::span<const double> mu0,
                       std::span<const double> x_old, std::span<double> x_new);

/// Bellman backup data for a single-cost SSP over a CsspModel layout.
struct BellmanView {
  std::span<const std::size_t> action_begin;   // per state, size S+1
  std::span<const std::size_t> outcome_begin;  // per global action, size A+1
  std::span<const Outcome> outcomes;
  std::span<const double> action_cost;         // expected one-step cost per global action
  std::span<const std::uint8_t> usable;        // per global action
  std::span<const std::uint8_t> active;        // per state; inactive states keep v_old

  std::size_t size() const { return action_begin.empty() ? 0 : action_begin.size() - 1; }
};

/// v_new[s] = min over usable a of cost(a) + sum_s' p v_old[s'] for active s.
/// Returns max |v_new - v_old| over active states.
double bellman_sweep_serial(const BellmanView& view, std::span<const double> v_old,
                            std::span<double> v_new);
double bellman_sweep_parallel(const BellmanView& view, std::span<const double> v_old,
                              std::span<double> v_new);
double bellman_sweep(const BellmanView& view, std::span<const double> v_old,
                     std::span<double> v_new);

}  // namespace hcssp::kernels
