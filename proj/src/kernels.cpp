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

#include "hcssp/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace hcssp::kernels {

namespace {

inline double occupancy_at(const ChainView& chain, std::span<const double> mu0,
                           std::span<const double> x_old, std::size_t i) {
  double acc = mu0[i];
  for (std::size_t e = chain.in_begin[i]; e < chain.in_begin[i + 1]; ++e) {
    acc += chain.in_prob[e] * x_old[chain.in_from[e]];
  }
  return acc;
}

inline double backup_at(const BellmanView& view, std::span<const double> v_old, std::size_t s) {
  double best = kInf;
  for (std::size_t a = view.action_begin[s]; a < view.action_begin[s + 1]; ++a) {
    if (!view.usable[a]) continue;
    double q = view.action_cost[a];
    for (std::size_t o = view.outcome_begin[a]; o < view.outcome_begin[a + 1]; ++o) {
      const Outcome& out = view.outcomes[o];
      if (out.prob > 0.0) q += out.prob * v_old[out.next];
    }
    best = std::min(best, q);
  }
  return best;
}

inline double change(double before, double after) {
  if (before == after) return 0.0;
  return std::abs(after - before);
}

}  // namespace

double occupancy_sweep_serial(const ChainView& chain, std::span<const double> mu0,
                              std::span<const double> x_old, std::span<double> x_new) {
  double residual = 0.0;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    x_new[i] = occupancy_at(chain, mu0, x_old, i);
    residual = std::max(residual, change(x_old[i], x_new[i]));
  }
  return residual;
}

double occupancy_sweep_parallel(const ChainView& chain, std::span<const double> mu0,
                                std::span<const double> x_old, std::span<double> x_new) {
  const auto n = static_cast<std::int64_t>(chain.size());
  double residual = 0.0;
#pragma omp parallel for schedule(static) reduction(max : residual)
  for (std::int64_t i = 0; i < n; ++i) {
    x_new[i] = occupancy_at(chain, mu0, x_old, static_cast<std::size_t>(i));
    residual = std::max(residual, change(x_old[i], x_new[i]));
  }
  return residual;
}

double occupancy_sweep(const ChainView& chain, std::span<const double> mu0,
                       std::span<const double> x_old, std::span<double> x_new) {
  if (chain.size() >= kParallelThreshold && !omp_in_parallel()) {
    return occupancy_sweep_parallel(chain, mu0, x_old, x_new);
  }
  return occupancy_sweep_serial(chain, mu0, x_old, x_new);
}

double bellman_sweep_serial(const BellmanView& view, std::span<const double> v_old,
                            std::span<double> v_new) {
  double residual = 0.0;
  for (std::size_t s = 0; s < view.size(); ++s) {
    if (!view.active[s]) {
      v_new[s] = v_old[s];
      continue;
    }
    v_new[s] = backup_at(view, v_old, s);
    residual = std::max(residual, change(v_old[s], v_new[s]));
  }
  return residual;
}

double bellman_sweep_parallel(const BellmanView& view, std::span<const double> v_old,
                              std::span<double> v_new) {
  const auto n = static_cast<std::int64_t>(view.size());
  double residual = 0.0;
#pragma omp parallel for schedule(static) reduction(max : residual)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(i);
    if (!view.active[s]) {
      v_new[s] = v_old[s];
      continue;
    }
    v_new[s] = backup_at(view, v_old, s);
    residual = std::max(residual, change(v_old[s], v_new[s]));
  }
  return residual;
}

double bellman_sweep(const BellmanView& view, std::span<const double> v_old,
                     std::span<double> v_new) {
  if (view.size() >= kParallelThreshold && !omp_in_parallel()) {
    return bellman_sweep_parallel(view, v_old, v_new);
  }
  return bellman_sweep_serial(view, v_old, v_new);
}

}  // namespace hcssp::kernels
