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
// The federated-averaging training loop over the analog uplink: broadcast,
// local full-batch gradient steps, clipped accumulated-gradient upload,
// aligned over-the-air aggregation, global update.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "otafl/aggregation.hpp"
#include "otafl/errors.hpp"
#include "otafl/models.hpp"
#include "otafl/privacy.hpp"
#include "otafl/scheduler.hpp"
#include "otafl/system_model.hpp"
#include "otafl/vec_math.hpp"

namespace otafl {

// One communication round of a simulation. grad_norm_sq is measured at the
// round start (before the update); loss and gap describe the model after the
// update. power_spent is constant across rounds for a fixed plan.
struct RoundMetrics {
  int round_index = 0;
  double global_loss = 0.0;
  std::optional<double> optimality_gap;
  double grad_norm_sq = 0.0;
  int clip_activations = 0;
  double power_spent = 0.0;
  double epsilon_this_round = 0.0;  // +inf on a noiseless channel
};

struct LocalTrainResult {
  Vec gradient;  // accumulated over the local steps, clipped to grad_bound
  bool clipped = false;
};

// Runs `local_steps` full-batch gradient steps from the broadcast model and
// returns the accumulated gradient, norm-clipped to grad_bound.
inline LocalTrainResult local_train(const ModelSpec& model, int party,
                                    std::span<const double> global_model,
                                    double learning_rate, int local_steps,
                                    double grad_bound) {
  if (party < 0 || party >= model.n_parties())
    throw validation_error("local_train: party index out of range");
  if (local_steps < 1)
    throw validation_error("local_train: local_steps must be >= 1");
  if (!(learning_rate > 0.0))
    throw validation_error("local_train: learning_rate must be > 0");
  if (!(grad_bound > 0.0))
    throw validation_error("local_train: grad_bound must be > 0");

  Vec w(global_model.begin(), global_model.end());
  Vec accumulated(w.size(), 0.0);
  for (int step = 0; step < local_steps; ++step) {
    const Vec g = model.local_gradient[party](w);
    if (!all_finite(g))
      throw numerical_error("local_train: non-finite local gradient (party " +
                            std::to_string(party) + ", step " +
                            std::to_string(step) + ")");
    add_scaled(accumulated, 1.0, g);
    add_scaled(w, -learning_rate, g);
  }
  LocalTrainResult out;
  out.clipped = clip_to_norm(accumulated, grad_bound);
  out.gradient = std::move(accumulated);
  return out;
}

struct SimulationResult {
  std::vector<RoundMetrics> rounds;
  Vec final_model;
  int total_clip_activations = 0;
};

// Executes the plan for its full round count. Deterministic given the seed:
// the channel noise is the only randomness. Devices are mapped to model
// parties through their dataset_ref.
inline SimulationResult run_simulation(const SchedulePlan& plan,
                                       const ModelSpec& model,
                                       const SystemParams& params,
                                       const std::vector<DeviceProfile>& fleet,
                                       std::uint64_t seed) {
  params.validate();
  if (plan.schedule.empty())
    throw validation_error("run_simulation: plan schedules no devices");
  if (plan.rounds < 1)
    throw validation_error("run_simulation: plan has no rounds");
  if (plan.local_steps < 1)
    throw validation_error("run_simulation: plan has no local steps");
  if (!(plan.nu > 0.0))
    throw validation_error("run_simulation: plan alignment coefficient must be > 0");
  if (model.dim != params.model_dim)
    throw validation_error("run_simulation: model dimension does not match params");

  std::vector<int> parties;
  parties.reserve(plan.schedule.size());
  for (int id : plan.schedule) {
    const DeviceProfile& dev =
        detail::device_by_id(fleet, id, "run_simulation");
    if (dev.dataset_ref < 0 || dev.dataset_ref >= model.n_parties())
      throw validation_error("run_simulation: device id " + std::to_string(id) +
                             " has no dataset slot");
    parties.push_back(dev.dataset_ref);
  }

  // Re-derive the scaling factors; throws if any device would exceed its peak
  // power under this plan.
  (void)power_scaling_factors(plan.schedule, plan.nu, params.grad_bound, fleet);

  const double watts = round_power(plan.schedule, plan.theta, fleet);
  const double eps_round =
      params.noise_std > 0.0
          ? per_round_epsilon(params.grad_bound, plan.nu, params.noise_std,
                              params.delta)
          : std::numeric_limits<double>::infinity();
  const int schedule_size = static_cast<int>(plan.schedule.size());

  std::mt19937_64 rng(seed);
  Vec m(model.dim, 0.0);
  SimulationResult result;
  result.rounds.reserve(plan.rounds);

  for (int round = 0; round < plan.rounds; ++round) {
    RoundMetrics metrics;
    metrics.round_index = round;
    metrics.grad_norm_sq = squared_norm(model.global_gradient(m));

    GradientMap gradients;
    for (std::size_t s = 0; s < parties.size(); ++s) {
      LocalTrainResult local =
          local_train(model, parties[s], m, params.learning_rate,
                      plan.local_steps, params.grad_bound);
      if (local.clipped) ++metrics.clip_activations;
      gradients.emplace(plan.schedule[s], std::move(local.gradient));
    }

    const OtaRound uplink =
        ota_aggregate(gradients, plan.nu, params.noise_std, rng);
    const Vec estimate = postprocess(uplink.received, schedule_size, plan.nu);
    add_scaled(m, -params.learning_rate, estimate);
    if (!all_finite(m))
      throw numerical_error("run_simulation: model diverged at round " +
                            std::to_string(round));

    metrics.global_loss = model.loss(m);
    if (model.optimal_value)
      metrics.optimality_gap = metrics.global_loss - *model.optimal_value;
    metrics.power_spent = watts;
    metrics.epsilon_this_round = eps_round;
    result.total_clip_activations += metrics.clip_activations;
    result.rounds.push_back(std::move(metrics));
  }
  result.final_model = std::move(m);
  return result;
}

}  // namespace otafl
