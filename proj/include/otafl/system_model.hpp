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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "otafl/errors.hpp"

namespace otafl {

// One federated participant. Only the channel magnitude matters here: the
// phase is assumed perfectly corrected at the transmitter, and channels are
// held fixed for the whole run.
struct DeviceProfile {
  int id = 0;
  double channel_gain = 0.0;  // |h_k|, unitless magnitude, must be > 0
  double peak_power = 0.0;    // P_k in watts, must be > 0
  int dataset_ref = -1;       // slot into the model's per-device data, -1 if none
};

inline void validate_device(const DeviceProfile& dev, const std::string& where = {}) {
  const std::string tag =
      where.empty() ? "device id " + std::to_string(dev.id) : where;
  if (!(dev.channel_gain > 0.0))
    throw validation_error(tag + ": channel_gain must be > 0");
  if (!(dev.peak_power > 0.0))
    throw validation_error(tag + ": peak_power must be > 0");
}

// All scalar problem constants. noise_std == 0 selects a noiseless diagnostic
// channel: privacy accounting is then disabled and per-round epsilon reported
// as infinity.
struct SystemParams {
  int n_devices = 0;              // fleet size N
  int model_dim = 0;              // model dimension d
  double noise_std = 0.0;         // channel noise std dev per coordinate
  double epsilon = 0.0;           // per-round privacy budget
  double delta = 0.0;             // DP relaxation probability, in (0,1)
  double sum_power = 0.0;         // total uplink energy budget in watts
  int total_rounds = 0;           // training-step budget T
  double grad_bound = 0.0;        // clipping bound on accumulated gradients
  double smoothness = 0.0;        // curvature upper bound of the global loss
  double strong_convexity = 0.0;  // 0 switches to the non-convex analysis
  double learning_rate = 0.0;
  double initial_gap = 0.0;       // E[L(m0)] - L(m*), or an upper bound on it

  // Geometric contraction factor of the convex analysis.
  double convergence_coeff() const { return 1.0 - strong_convexity / smoothness; }

  void validate() const {
    if (n_devices < 1) throw validation_error("params: n_devices must be >= 1");
    if (model_dim < 1) throw validation_error("params: model_dim must be >= 1");
    if (!(noise_std >= 0.0)) throw validation_error("params: noise_std must be >= 0");
    if (!(epsilon > 0.0)) throw validation_error("params: epsilon must be > 0");
    if (!(delta > 0.0 && delta < 1.0))
      throw validation_error("params: delta must lie in (0,1)");
    if (!(sum_power > 0.0)) throw validation_error("params: sum_power must be > 0");
    if (total_rounds < 1) throw validation_error("params: total_rounds must be >= 1");
    if (!(grad_bound > 0.0)) throw validation_error("params: grad_bound must be > 0");
    if (!(smoothness > 0.0)) throw validation_error("params: smoothness must be > 0");
    if (!(strong_convexity >= 0.0))
      throw validation_error("params: strong_convexity must be >= 0");
    if (strong_convexity > smoothness * (1.0 + 1e-12))
      throw validation_error("params: strong_convexity must not exceed smoothness");
    if (!(learning_rate > 0.0))
      throw validation_error("params: learning_rate must be > 0");
    if (learning_rate > (1.0 / smoothness) * (1.0 + 1e-12))
      throw validation_error("params: learning_rate must not exceed 1/smoothness");
    if (!(initial_gap >= 0.0))
      throw validation_error("params: initial_gap must be >= 0");
    if (strong_convexity > 0.0) {
      const double eta = convergence_coeff();
      if (!(eta >= 0.0 && eta < 1.0))
        throw validation_error("params: convergence coefficient must lie in [0,1)");
    }
  }
};

enum class PowerMode { equal_power, heterogeneous };

// The two per-device alignment limits, in the canonical weakest-channel-first
// ordering. c_m bounds the alignment factor through peak power, q_m through
// the per-round share of the sum power budget. q depends on the round count it
// was built with; recompute after the round count changes.
struct ChannelVectorPair {
  std::vector<double> c;          // ascending; heterogeneous mode stores the sorted list
  std::vector<double> q;          // ascending by construction
  std::vector<int> h_order_ids;   // device ids ascending by channel gain
  std::vector<int> c_rank_to_id;  // device ids ascending by c (equal power: == h_order_ids)
  int round_count_used = 0;       // the round count baked into q
};

// Canonical device ordering: ascending channel gain, ties by ascending id.
inline std::vector<DeviceProfile> sort_devices(std::vector<DeviceProfile> devices) {
  if (devices.empty()) throw validation_error("sort_devices: empty fleet");
  for (const auto& dev : devices) validate_device(dev);
  std::sort(devices.begin(), devices.end(),
            [](const DeviceProfile& a, const DeviceProfile& b) {
              if (a.channel_gain != b.channel_gain)
                return a.channel_gain < b.channel_gain;
              return a.id < b.id;
            });
  return devices;
}

inline bool is_sorted_by_gain(std::span<const DeviceProfile> devices) {
  for (std::size_t i = 1; i < devices.size(); ++i)
    if (devices[i].channel_gain < devices[i - 1].channel_gain) return false;
  return true;
}

inline ChannelVectorPair compute_channel_vectors(
    const std::vector<DeviceProfile>& sorted, double sum_power, int rounds,
    PowerMode mode) {
  if (sorted.empty())
    throw validation_error("compute_channel_vectors: empty fleet");
  if (rounds < 1)
    throw validation_error("compute_channel_vectors: rounds must be >= 1");
  if (!(sum_power > 0.0))
    throw validation_error("compute_channel_vectors: sum_power must be > 0");
  if (!is_sorted_by_gain(sorted))
    throw validation_error(
        "compute_channel_vectors: devices must be sorted ascending by channel gain");
  if (mode == PowerMode::equal_power) {
    for (const auto& dev : sorted)
      if (dev.peak_power != sorted.front().peak_power)
        throw validation_error(
            "compute_channel_vectors: equal-power mode requires identical peak_power "
            "(device id " + std::to_string(dev.id) + " differs)");
  }

  const int n = static_cast<int>(sorted.size());
  ChannelVectorPair out;
  out.round_count_used = rounds;
  out.c.resize(n);
  out.q.resize(n);
  out.h_order_ids.resize(n);
  for (int i = 0; i < n; ++i) {
    out.c[i] = sorted[i].channel_gain * std::sqrt(sorted[i].peak_power);
    out.h_order_ids[i] = sorted[i].id;
  }

  // q_m covers the suffix of the weakest-first ordering starting at m.
  const double per_round = sum_power / rounds;
  double tail_inv_gain_sq = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const double g = sorted[i].channel_gain;
    tail_inv_gain_sq += 1.0 / (g * g);
    out.q[i] = std::sqrt(per_round / tail_inv_gain_sq);
  }

  out.c_rank_to_id = out.h_order_ids;
  if (mode == PowerMode::heterogeneous) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (out.c[a] != out.c[b]) return out.c[a] < out.c[b];
      return sorted[a].id < sorted[b].id;
    });
    std::vector<double> c_sorted(n);
    std::vector<int> rank_to_id(n);
    for (int r = 0; r < n; ++r) {
      c_sorted[r] = out.c[order[r]];
      rank_to_id[r] = sorted[order[r]].id;
    }
    out.c = std::move(c_sorted);
    out.c_rank_to_id = std::move(rank_to_id);
  }
  return out;
}

// Largest feasible alignment factor for an arbitrary subset of devices:
// min{cap, min_k |h_k|sqrt(P_k), sqrt((sum_power/rounds) / sum_k 1/|h_k|^2)}.
// Evaluated directly from the subset so it is valid for any membership, not
// just the top-k sets used by the candidate search.
inline double theta_max(const std::vector<DeviceProfile>& fleet,
                        std::span<const int> subset, double cap,
                        double sum_power, int rounds) {
  if (subset.empty()) throw validation_error("theta_max: empty subset");
  if (rounds < 1) throw validation_error("theta_max: rounds must be >= 1");
  if (!(cap > 0.0)) throw validation_error("theta_max: cap must be > 0");
  if (!(sum_power > 0.0)) throw validation_error("theta_max: sum_power must be > 0");

  std::unordered_map<int, const DeviceProfile*> by_id;
  by_id.reserve(fleet.size());
  for (const auto& dev : fleet) by_id.emplace(dev.id, &dev);

  std::unordered_set<int> seen;
  double min_c = std::numeric_limits<double>::infinity();
  double inv_gain_sq = 0.0;
  for (int id : subset) {
    const auto it = by_id.find(id);
    if (it == by_id.end())
      throw validation_error("theta_max: unknown device id " + std::to_string(id));
    if (!seen.insert(id).second)
      throw validation_error("theta_max: duplicate device id " + std::to_string(id));
    const DeviceProfile& dev = *it->second;
    validate_device(dev);
    min_c = std::min(min_c, dev.channel_gain * std::sqrt(dev.peak_power));
    inv_gain_sq += 1.0 / (dev.channel_gain * dev.channel_gain);
  }
  const double q = std::sqrt((sum_power / rounds) / inv_gain_sq);
  return std::min({cap, min_c, q});
}

}  // namespace otafl
