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
// Independent verifiers: exhaustive subset search for the scheduling problem,
// a plan audit that re-derives every feasibility constraint, and Monte-Carlo
// statistics of the post-processed channel noise. These re-implement the
// formulas on purpose and share no code path with the scheduler beyond the
// public contracts they check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "otafl/errors.hpp"
#include "otafl/privacy.hpp"
#include "otafl/scheduler.hpp"
#include "otafl/system_model.hpp"

namespace otafl {

struct BruteForceResult {
  std::vector<int> schedule;  // device ids, ascending
  double theta = 0.0;
  double psi = 0.0;
};

// Exhaustive search over every nonempty device subset, with the alignment
// factor set to the subset's own limit. Ties go to the lexicographically
// smallest id list. Refuses fleets beyond 20 devices.
inline BruteForceResult brute_force_p2(const std::vector<DeviceProfile>& fleet,
                                       double cap, double sum_power, int rounds,
                                       const SystemParams& params) {
  const int n = static_cast<int>(fleet.size());
  if (n < 1) throw validation_error("brute_force_p2: empty fleet");
  if (n > 20)
    throw validation_error(
        "brute_force_p2: refusing fleets beyond 20 devices (cost guard)");
  if (rounds < 1) throw validation_error("brute_force_p2: rounds must be >= 1");
  if (!(cap > 0.0)) throw validation_error("brute_force_p2: cap must be > 0");

  std::vector<DeviceProfile> devices = fleet;
  std::sort(devices.begin(), devices.end(),
            [](const DeviceProfile& a, const DeviceProfile& b) {
              return a.id < b.id;
            });

  BruteForceResult best;
  best.psi = std::numeric_limits<double>::infinity();
  std::vector<int> ids;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    ids.clear();
    double min_c = std::numeric_limits<double>::infinity();
    double inv_gain_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!(mask & (1u << i))) continue;
      const DeviceProfile& dev = devices[i];
      ids.push_back(dev.id);
      min_c = std::min(min_c, dev.channel_gain * std::sqrt(dev.peak_power));
      inv_gain_sq += 1.0 / (dev.channel_gain * dev.channel_gain);
    }
    const double theta =
        std::min({cap, min_c, std::sqrt((sum_power / rounds) / inv_gain_sq)});
    const double size = static_cast<double>(ids.size());
    const double part = 1.0 - size / params.n_devices;
    const double psi = 4.0 * part * part +
                       params.model_dim * params.noise_std * params.noise_std /
                           (2.0 * size * size * theta * theta);
    if (best.schedule.empty()) {
      best = BruteForceResult{ids, theta, psi};
      continue;
    }
    const double scale = std::max({1.0, std::abs(psi), std::abs(best.psi)});
    if (psi < best.psi - 1e-15 * scale) {
      best = BruteForceResult{ids, theta, psi};
    } else if (std::abs(psi - best.psi) <= 1e-15 * scale && ids < best.schedule) {
      best = BruteForceResult{ids, theta, psi};
    }
  }
  return best;
}

struct AuditCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct PlanAudit {
  std::vector<AuditCheck> checks;
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

// Re-checks every plan invariant with its own arithmetic: scaling factors in
// range, peak-power limit on the alignment coefficient, the sum power budget,
// the training-round budget, and the per-round privacy budget.
inline PlanAudit verify_plan(const SchedulePlan& plan,
                             const std::vector<DeviceProfile>& fleet,
                             const SystemParams& params) {
  PlanAudit audit;
  auto add = [&](std::string name, bool ok, std::string detail) {
    audit.checks.push_back({std::move(name), ok, std::move(detail)});
  };
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
  };

  std::vector<const DeviceProfile*> scheduled;
  {
    bool ok = !plan.schedule.empty();
    std::string detail = ok ? "" : "schedule is empty";
    std::vector<int> seen;
    for (int id : plan.schedule) {
      const DeviceProfile* found = nullptr;
      for (const auto& dev : fleet)
        if (dev.id == id) found = &dev;
      if (found == nullptr) {
        ok = false;
        detail = "unknown device id " + std::to_string(id);
        break;
      }
      if (std::find(seen.begin(), seen.end(), id) != seen.end()) {
        ok = false;
        detail = "duplicate device id " + std::to_string(id);
        break;
      }
      seen.push_back(id);
      scheduled.push_back(found);
    }
    add("schedule_members", ok, std::move(detail));
    if (!ok) return audit;
  }

  add("theta_nu_consistency",
      std::abs(plan.theta - plan.nu * params.grad_bound) <=
          1e-12 * std::max(1.0, plan.theta),
      "theta=" + fmt(plan.theta) + " nu*grad_bound=" +
          fmt(plan.nu * params.grad_bound));

  {
    bool ok = true;
    std::string detail;
    for (const DeviceProfile* dev : scheduled) {
      const double g2 = dev->channel_gain * dev->channel_gain;
      const double phi = plan.theta * plan.theta / (g2 * dev->peak_power);
      const auto it = plan.power_scaling.find(dev->id);
      if (it == plan.power_scaling.end()) {
        ok = false;
        detail = "missing scaling factor for device id " + std::to_string(dev->id);
        break;
      }
      if (!(it->second > 0.0) || it->second > 1.0 + 1e-12 ||
          std::abs(it->second - phi) > 1e-9 * std::max(1.0, phi)) {
        ok = false;
        detail = "device id " + std::to_string(dev->id) + ": stored " +
                 fmt(it->second) + ", derived " + fmt(phi);
        break;
      }
      if (phi > 1.0 + 1e-9) {
        ok = false;
        detail = "device id " + std::to_string(dev->id) +
                 " exceeds peak power (scaling " + fmt(phi) + ")";
        break;
      }
    }
    add("power_scaling_range", ok, std::move(detail));
  }

  {
    double min_limit = std::numeric_limits<double>::infinity();
    for (const DeviceProfile* dev : scheduled)
      min_limit = std::min(min_limit, dev->channel_gain *
                                          std::sqrt(dev->peak_power) /
                                          params.grad_bound);
    add("alignment_peak_limit", plan.nu <= min_limit * (1.0 + 1e-12),
        "nu=" + fmt(plan.nu) + " limit=" + fmt(min_limit));
  }

  {
    double per_round = 0.0;
    for (const DeviceProfile* dev : scheduled)
      per_round +=
          plan.theta * plan.theta / (dev->channel_gain * dev->channel_gain);
    const double total = plan.rounds * per_round;
    add("sum_power_budget", total <= params.sum_power * (1.0 + 1e-12),
        "spend=" + fmt(total) + " budget=" + fmt(params.sum_power));
  }

  {
    const bool rounds_ok = plan.rounds >= 1 && plan.rounds <= params.total_rounds;
    const int expected_steps = params.total_rounds / plan.rounds;
    const bool steps_ok = rounds_ok && plan.local_steps == expected_steps &&
                          plan.local_steps >= 1 &&
                          plan.local_steps * plan.rounds <= params.total_rounds;
    add("round_budget", rounds_ok && steps_ok,
        "rounds=" + std::to_string(plan.rounds) +
            " local_steps=" + std::to_string(plan.local_steps) +
            " total=" + std::to_string(params.total_rounds));
  }

  if (params.noise_std > 0.0) {
    const double eps = 2.0 * params.grad_bound * plan.nu / params.noise_std *
                       std::sqrt(2.0 * std::log(1.25 / params.delta));
    add("privacy_budget", eps <= params.epsilon * (1.0 + 1e-9),
        "per_round=" + fmt(eps) + " budget=" + fmt(params.epsilon));
  } else {
    add("privacy_budget", true, "noiseless channel: privacy not accounted");
  }

  return audit;
}

struct NoiseStats {
  double mean = 0.0;
  double variance = 0.0;
};

// Empirical per-coordinate statistics of the post-processed channel noise
// r / (|K| nu). The variance should match noise_std^2 / (|K| nu)^2.
inline NoiseStats mc_noise_stats(double nu, int schedule_size, double noise_std,
                                 long samples, std::uint64_t seed) {
  if (samples < 10000)
    throw validation_error("mc_noise_stats: need at least 1e4 samples");
  if (schedule_size < 1)
    throw validation_error("mc_noise_stats: schedule_size must be >= 1");
  if (!(nu > 0.0)) throw validation_error("mc_noise_stats: nu must be > 0");
  if (!(noise_std >= 0.0))
    throw validation_error("mc_noise_stats: noise_std must be >= 0");

  if (noise_std == 0.0) return NoiseStats{0.0, 0.0};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, noise_std);
  const double scale = 1.0 / (schedule_size * nu);
  double mean = 0.0, m2 = 0.0;
  for (long i = 1; i <= samples; ++i) {
    const double x = dist(rng) * scale;
    const double d1 = x - mean;
    mean += d1 / i;
    m2 += d1 * (x - mean);
  }
  return NoiseStats{mean, m2 / (samples - 1)};
}

// One randomized scheduling instance for solver-vs-oracle comparisons.
struct OracleInstance {
  std::vector<DeviceProfile> fleet;
  double cap = 0.0;
  double sum_power = 0.0;
  int rounds = 0;
  PowerMode mode = PowerMode::equal_power;
  SystemParams params;
};

inline OracleInstance random_p2_instance(std::mt19937_64& rng,
                                         bool heterogeneous) {
  std::uniform_int_distribution<int> size_dist(2, 12);
  std::uniform_real_distribution<double> log_gain(std::log(0.05), std::log(2.0));
  std::uniform_real_distribution<double> power_dist(0.5, 2.0);
  std::uniform_int_distribution<int> dim_dist(2, 50);
  std::uniform_real_distribution<double> sigma_dist(0.1, 2.0);
  std::uniform_real_distribution<double> eps_dist(0.05, 5.0);
  std::uniform_real_distribution<double> delta_dist(1e-4, 0.2);
  std::uniform_real_distribution<double> budget_dist(1.0, 50.0);
  std::uniform_int_distribution<int> rounds_dist(1, 20);

  OracleInstance inst;
  const int n = size_dist(rng);
  const double shared_power = power_dist(rng);
  for (int i = 0; i < n; ++i) {
    DeviceProfile dev;
    dev.id = i + 1;
    dev.channel_gain = std::exp(log_gain(rng));
    dev.peak_power = heterogeneous ? power_dist(rng) : shared_power;
    dev.dataset_ref = i;
    inst.fleet.push_back(dev);
  }
  inst.mode =
      heterogeneous ? PowerMode::heterogeneous : PowerMode::equal_power;
  inst.sum_power = budget_dist(rng);
  inst.rounds = rounds_dist(rng);

  SystemParams& p = inst.params;
  p.n_devices = n;
  p.model_dim = dim_dist(rng);
  p.noise_std = sigma_dist(rng);
  p.epsilon = eps_dist(rng);
  p.delta = delta_dist(rng);
  p.sum_power = inst.sum_power;
  p.total_rounds = std::max(inst.rounds, 20);
  p.grad_bound = 1.0;
  p.smoothness = 1.0;
  p.strong_convexity = 0.5;
  p.learning_rate = 1.0;
  p.initial_gap = 1.0;

  inst.cap = alignment_cap(make_privacy_budget(p.epsilon, p.delta), p.noise_std);
  return inst;
}

struct SweepOutcome {
  int instances = 0;
  int mismatches = 0;
  double worst_rel_err = 0.0;
  std::vector<std::string> failures;
};

// Runs randomized instances through both the solver and the exhaustive
// search and compares the achieved objective values. inject_fault perturbs
// the solver's value to prove the harness catches disagreements.
inline SweepOutcome oracle_sweep(int instances, std::uint64_t seed,
                                 double rel_tol = 1e-9,
                                 bool inject_fault = false) {
  if (instances < 1)
    throw validation_error("oracle_sweep: instances must be >= 1");
  std::mt19937_64 rng(seed);
  SweepOutcome outcome;
  outcome.instances = instances;
  for (int i = 0; i < instances; ++i) {
    const OracleInstance inst = random_p2_instance(rng, i % 2 == 1);
    const auto sorted = sort_devices(inst.fleet);
    const DeviceSelection sel = solve_p2(sorted, inst.cap, inst.sum_power,
                                         inst.rounds, inst.mode, inst.params);
    double solver_psi = objective_psi(static_cast<int>(sel.schedule.size()),
                                      sel.theta, inst.params);
    if (inject_fault) solver_psi *= 1.01;
    const BruteForceResult oracle = brute_force_p2(
        inst.fleet, inst.cap, inst.sum_power, inst.rounds, inst.params);
    const double rel = std::abs(solver_psi - oracle.psi) /
                       std::max({1e-300, std::abs(solver_psi), std::abs(oracle.psi)});
    outcome.worst_rel_err = std::max(outcome.worst_rel_err, rel);
    if (!(rel <= rel_tol)) {
      ++outcome.mismatches;
      std::ostringstream os;
      os.precision(15);
      os << "instance " << i << " (" <<
          (inst.mode == PowerMode::heterogeneous ? "heterogeneous" : "equal")
         << "): solver psi " << solver_psi << " vs oracle psi " << oracle.psi;
      outcome.failures.push_back(os.str());
    }
  }
  return outcome;
}

}  // namespace otafl
