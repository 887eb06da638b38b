//
// Copyright 2026 The otafl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "otafl/errors.hpp"
#include "otafl/vec_math.hpp"

namespace otafl {

// sqrt(2 ln(1.25/delta)), the Gaussian-mechanism multiplier.
inline double gaussian_phi(double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw validation_error("gaussian_phi: delta must lie in (0,1)");
  return std::sqrt(2.0 * std::log(1.25 / delta));
}

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;
  double phi = 0.0;  // cached gaussian_phi(delta)
};

inline PrivacyBudget make_privacy_budget(double epsilon, double delta) {
  if (!(epsilon > 0.0))
    throw validation_error("privacy budget: epsilon must be > 0");
  return PrivacyBudget{epsilon, delta, gaussian_phi(delta)};
}

// Per-round privacy cost of an aligned upload for every scheduled device:
// 2 * grad_bound * alignment_coeff / noise_std * phi(delta). The channel noise
// is the only randomness, so the figure is an upper bound on the actual
// leakage and is identical across scheduled devices. No cross-round
// composition is claimed.
inline double per_round_epsilon(double grad_bound, double alignment_coeff,
                                double noise_std, double delta) {
  if (!(grad_bound > 0.0))
    throw validation_error("per_round_epsilon: grad_bound must be > 0");
  if (!(alignment_coeff >= 0.0))
    throw validation_error("per_round_epsilon: alignment_coeff must be >= 0");
  if (!(noise_std > 0.0))
    throw validation_error("per_round_epsilon: noise_std must be > 0");
  return 2.0 * grad_bound * alignment_coeff / noise_std * gaussian_phi(delta);
}

// Largest alignment factor theta = nu * grad_bound whose per-round cost stays
// inside the budget: epsilon * noise_std / (2 * phi).
inline double alignment_cap(const PrivacyBudget& budget, double noise_std) {
  if (!(budget.epsilon > 0.0) || !(budget.phi > 0.0))
    throw validation_error("alignment_cap: invalid privacy budget");
  if (!(noise_std > 0.0))
    throw validation_error("alignment_cap: noise_std must be > 0");
  return budget.epsilon * noise_std / (2.0 * budget.phi);
}

// Measured sensitivity of the transmitted signal to one swapped sample:
// alignment_coeff * ||g(D) - g(D')||_2 with both gradients clipped to
// grad_bound first. The clipping makes 2 * grad_bound * alignment_coeff an
// upper bound on the result.
template <typename GradFn>
double empirical_sensitivity(GradFn&& gradient_of, std::vector<Vec> dataset,
                             std::size_t swap_index, const Vec& replacement,
                             double alignment_coeff, double grad_bound) {
  if (swap_index >= dataset.size())
    throw validation_error("empirical_sensitivity: swap_index out of range");
  if (!(alignment_coeff >= 0.0))
    throw validation_error("empirical_sensitivity: alignment_coeff must be >= 0");
  if (!(grad_bound > 0.0))
    throw validation_error("empirical_sensitivity: grad_bound must be > 0");

  Vec g = gradient_of(dataset);
  clip_to_norm(g, grad_bound);
  dataset[swap_index] = replacement;
  Vec g_swapped = gradient_of(dataset);
  clip_to_norm(g_swapped, grad_bound);
  if (g.size() != g_swapped.size())
    throw validation_error("empirical_sensitivity: gradient dimension changed");

  double sq = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double diff = g[i] - g_swapped[i];
    sq += diff * diff;
  }
  return alignment_coeff * std::sqrt(sq);
}

}  // namespace otafl
