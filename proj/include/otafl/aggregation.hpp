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
// Analog uplink simulation: per-device power scaling, superposition of the
// simultaneously transmitted gradients over a noisy multiple-access channel,
// post-processing back to a gradient average, and the exact split of the
// recovery error into its fading and noise parts.

#pragma once

#include <cmath>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "otafl/errors.hpp"
#include "otafl/system_model.hpp"
#include "otafl/vec_math.hpp"

namespace otafl {

// Device id -> clipped accumulated gradient. Ordered so iteration (and hence
// any noise interleaving) is deterministic.
using GradientMap = std::map<int, Vec>;

namespace detail {
inline const DeviceProfile& device_by_id(const std::vector<DeviceProfile>& fleet,
                                         int id, const char* where) {
  for (const auto& dev : fleet)
    if (dev.id == id) return dev;
  throw validation_error(std::string(where) + ": unknown device id " +
                         std::to_string(id));
}
}  // namespace detail

// Power scaling factors phi_k = nu^2 * grad_bound^2 / (|h_k|^2 P_k) that align
// every received gradient to the common coefficient nu. Values a hair above 1
// from rounding are clamped; anything larger exceeds the device's peak power.
inline std::map<int, double> power_scaling_factors(
    std::span<const int> schedule, double nu, double grad_bound,
    const std::vector<DeviceProfile>& fleet) {
  if (schedule.empty())
    throw validation_error("power_scaling_factors: empty schedule");
  if (!(nu > 0.0)) throw validation_error("power_scaling_factors: nu must be > 0");
  if (!(grad_bound > 0.0))
    throw validation_error("power_scaling_factors: grad_bound must be > 0");

  std::map<int, double> scaling;
  for (int id : schedule) {
    const DeviceProfile& dev =
        detail::device_by_id(fleet, id, "power_scaling_factors");
    const double g2 = dev.channel_gain * dev.channel_gain;
    double phi = nu * nu * grad_bound * grad_bound / (g2 * dev.peak_power);
    if (phi > 1.0 + 1e-12)
      throw infeasible_error(
          "power_scaling_factors: peak power violated at device id " +
          std::to_string(id) + " (scaling factor " + std::to_string(phi) + ")");
    scaling[id] = std::min(phi, 1.0);
  }
  return scaling;
}

// Received amplitude per device, |h_k| sqrt(phi_k P_k) / grad_bound. Equals nu
// exactly when the scaling factors are aligned.
inline std::map<int, double> amplitude_factors(
    const std::map<int, double>& scaling,
    const std::vector<DeviceProfile>& fleet, double grad_bound) {
  if (!(grad_bound > 0.0))
    throw validation_error("amplitude_factors: grad_bound must be > 0");
  std::map<int, double> amps;
  for (const auto& [id, phi] : scaling) {
    const DeviceProfile& dev = detail::device_by_id(fleet, id, "amplitude_factors");
    amps[id] = dev.channel_gain * std::sqrt(phi * dev.peak_power) / grad_bound;
  }
  return amps;
}

struct OtaRound {
  Vec received;  // superposed signal at the receiver
  Vec noise;     // the exact noise vector that was drawn
};

namespace detail {
inline std::size_t common_dimension(const GradientMap& gradients,
                                    const char* where) {
  if (gradients.empty())
    throw validation_error(std::string(where) + ": no gradients");
  const std::size_t dim = gradients.begin()->second.size();
  for (const auto& [id, g] : gradients)
    if (g.size() != dim)
      throw validation_error(std::string(where) +
                             ": gradient dimension mismatch at device id " +
                             std::to_string(id));
  return dim;
}

inline Vec draw_noise(std::size_t dim, double noise_std, std::mt19937_64& rng) {
  Vec noise(dim, 0.0);
  if (noise_std > 0.0) {
    std::normal_distribution<double> dist(0.0, noise_std);
    for (double& r : noise) r = dist(rng);
  }
  return noise;
}
}  // namespace detail

// General superposition with explicit per-device amplitudes:
// received = sum_k a_k g_k + r. The drawn noise is returned so callers can
// decompose the recovery error exactly.
inline OtaRound ota_superpose(const GradientMap& gradients,
                              const std::map<int, double>& amplitudes,
                              double noise_std, std::mt19937_64& rng) {
  const std::size_t dim = detail::common_dimension(gradients, "ota_superpose");
  if (!(noise_std >= 0.0))
    throw validation_error("ota_superpose: noise_std must be >= 0");
  OtaRound round;
  round.noise = detail::draw_noise(dim, noise_std, rng);
  round.received = round.noise;
  for (const auto& [id, g] : gradients) {
    const auto it = amplitudes.find(id);
    if (it == amplitudes.end())
      throw validation_error("ota_superpose: missing amplitude for device id " +
                             std::to_string(id));
    add_scaled(round.received, it->second, g);
  }
  return round;
}

// Aligned uplink: received = nu * sum_k g_k + r.
inline OtaRound ota_aggregate(const GradientMap& gradients, double nu,
                              double noise_std, std::mt19937_64& rng) {
  const std::size_t dim = detail::common_dimension(gradients, "ota_aggregate");
  if (!(nu > 0.0)) throw validation_error("ota_aggregate: nu must be > 0");
  if (!(noise_std >= 0.0))
    throw validation_error("ota_aggregate: noise_std must be >= 0");
  OtaRound round;
  round.noise = detail::draw_noise(dim, noise_std, rng);
  Vec sum(dim, 0.0);
  for (const auto& [id, g] : gradients) add_scaled(sum, 1.0, g);
  round.received.resize(dim);
  for (std::size_t i = 0; i < dim; ++i)
    round.received[i] = nu * sum[i] + round.noise[i];
  return round;
}

// Receiver post-processing: divide by |K| * nu. Composed with the aligned
// uplink at zero noise this recovers the exact arithmetic mean.
inline Vec postprocess(std::span<const double> received, int schedule_size,
                       double nu) {
  if (schedule_size < 1)
    throw validation_error("postprocess: schedule_size must be >= 1");
  if (!(nu > 0.0)) throw validation_error("postprocess: nu must be > 0");
  Vec out(received.begin(), received.end());
  const double scale = 1.0 / (schedule_size * nu);
  for (double& x : out) x *= scale;
  return out;
}

struct ErrorSplit {
  Vec fading;  // (1/|K|) sum_k (a_k/nu - 1) g_k, zero under exact alignment
  Vec noise;   // r / (|K| nu)
};

// Exact decomposition of the recovery error: the estimate minus the true
// average equals fading + noise, whatever the amplitudes are.
inline ErrorSplit error_decomposition(const GradientMap& gradients,
                                      const std::map<int, double>& amplitudes,
                                      double nu,
                                      std::span<const double> noise_drawn) {
  const std::size_t dim = detail::common_dimension(gradients, "error_decomposition");
  if (!(nu > 0.0)) throw validation_error("error_decomposition: nu must be > 0");
  if (noise_drawn.size() != dim)
    throw validation_error("error_decomposition: noise dimension mismatch");
  const double k = static_cast<double>(gradients.size());
  ErrorSplit split;
  split.fading.assign(dim, 0.0);
  for (const auto& [id, g] : gradients) {
    const auto it = amplitudes.find(id);
    if (it == amplitudes.end())
      throw validation_error(
          "error_decomposition: missing amplitude for device id " +
          std::to_string(id));
    add_scaled(split.fading, (it->second / nu - 1.0) / k, g);
  }
  split.noise.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) split.noise[i] = noise_drawn[i] / (k * nu);
  return split;
}

// Transmit power spent by the whole schedule in one communication round,
// sum_k theta^2 / |h_k|^2. Round-independent for a fixed plan.
inline double round_power(std::span<const int> schedule, double theta,
                          const std::vector<DeviceProfile>& fleet) {
  if (schedule.empty()) throw validation_error("round_power: empty schedule");
  if (!(theta >= 0.0)) throw validation_error("round_power: theta must be >= 0");
  double watts = 0.0;
  for (int id : schedule) {
    const DeviceProfile& dev = detail::device_by_id(fleet, id, "round_power");
    watts += theta * theta / (dev.channel_gain * dev.channel_gain);
  }
  return watts;
}

}  // namespace otafl
