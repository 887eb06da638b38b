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
// Joint design of the scheduled device set, the alignment factor, and the
// number of aggregation rounds under sum-power and per-round privacy budgets.
// The search decomposes into a closed-form candidate enumeration over
// (schedule, alignment factor) at a fixed round count and an integer scan over
// the round count, alternated until the predicted objective settles.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "otafl/aggregation.hpp"
#include "otafl/bounds.hpp"
#include "otafl/errors.hpp"
#include "otafl/privacy.hpp"
#include "otafl/system_model.hpp"

namespace otafl {

// One (schedule, alignment factor) candidate with its objective value.
// rank is the 1-based index in the closed-form enumeration; sweep entries
// added for heterogeneous peak powers carry rank 0 and closed_form = false.
struct CandidatePair {
  int rank = 0;
  double theta = 0.0;
  std::vector<int> schedule;  // device ids, ascending
  double psi = 0.0;
  bool feasible = true;
  bool closed_form = true;
};

// A fully solved design ready to drive a simulation.
struct SchedulePlan {
  std::vector<int> schedule;           // device ids, ascending
  double theta = 0.0;                  // alignment factor
  double nu = 0.0;                     // alignment coefficient theta / grad_bound
  int rounds = 0;                      // aggregation rounds
  int local_steps = 0;                 // local training steps per round
  std::map<int, double> power_scaling; // device id -> scaling factor in (0,1]
  double predicted_objective = 0.0;
  // Upper bound on each scheduled device's per-round privacy leakage; +inf on
  // a noiseless channel. Per-round only: no cross-round composition is claimed.
  double per_round_epsilon = std::numeric_limits<double>::infinity();
  bool converged = true;               // false when the alternation hit max_iters
  int iterations = 0;
  std::vector<double> objective_trace; // objective after each alternation
  std::vector<CandidatePair> candidates;
};

// Per-round scheduling objective: the partial-participation penalty plus the
// post-processed noise variance term.
inline double objective_psi(int schedule_size, double theta,
                            const SystemParams& p) {
  if (schedule_size < 1)
    throw validation_error("objective_psi: schedule_size must be >= 1");
  if (!(theta > 0.0)) throw validation_error("objective_psi: theta must be > 0");
  const double part = 1.0 - static_cast<double>(schedule_size) / p.n_devices;
  const double kt = schedule_size * theta;
  return 4.0 * part * part +
         p.model_dim * p.noise_std * p.noise_std / (2.0 * kt * kt);
}

// Full design objective: the strongly convex gap bound with the local-step
// count treated as the continuous ratio total_rounds / rounds.
inline double objective_w(int schedule_size, double theta, int rounds,
                          const SystemParams& p) {
  return detail::convex_gap_core(
      rounds, schedule_size, theta,
      static_cast<double>(p.total_rounds) / rounds, p);
}

struct DeviceSelection {
  std::vector<int> schedule;  // device ids, ascending
  double theta = 0.0;
  std::vector<CandidatePair> candidates;
};

// Optimal (schedule, alignment factor) at a fixed round count.
//
// Devices must arrive in the canonical ascending-gain order. With equal peak
// powers the optimum is provably among the closed-form pairs: suffix sets of
// the gain ordering with theta at the binding channel/power/privacy limit.
// With per-device peak powers the alignment limits no longer rank devices the
// way the per-round power limits do, so the closed-form pairs are kept (for
// the audit ledger, feasibility-checked) and the search additionally sweeps,
// for every alignment-limit threshold, each best channel-ranked subset of the
// devices above that threshold. The sweep provably contains the optimum.
inline DeviceSelection solve_p2(const std::vector<DeviceProfile>& sorted,
                                double cap, double sum_power, int rounds,
                                PowerMode mode, const SystemParams& params) {
  if (sorted.empty()) throw validation_error("solve_p2: empty fleet");
  if (static_cast<int>(sorted.size()) != params.n_devices)
    throw validation_error("solve_p2: fleet size does not match params.n_devices");
  if (!(cap > 0.0))
    throw infeasible_error(
        "solve_p2: privacy cap is not positive; no feasible alignment factor");

  const ChannelVectorPair vec =
      compute_channel_vectors(sorted, sum_power, rounds, mode);
  const int n = static_cast<int>(sorted.size());

  std::vector<CandidatePair> candidates;
  auto push_pair = [&](int rank, double theta, std::vector<int> ids,
                       bool closed_form) {
    std::sort(ids.begin(), ids.end());
    CandidatePair pair;
    pair.rank = rank;
    pair.theta = theta;
    pair.schedule = std::move(ids);
    pair.closed_form = closed_form;
    pair.feasible =
        theta <= theta_max(sorted, pair.schedule, cap, sum_power, rounds) *
                     (1.0 + 1e-12);
    pair.psi = objective_psi(static_cast<int>(pair.schedule.size()), theta, params);
    candidates.push_back(std::move(pair));
  };
  auto gain_suffix_ids = [&](int start) {
    return std::vector<int>(vec.h_order_ids.begin() + start, vec.h_order_ids.end());
  };

  if (cap < std::min(vec.c.front(), vec.q.front())) {
    // The privacy cap binds before any channel or power limit: schedule
    // everyone at the cap.
    push_pair(1, cap, gain_suffix_ids(0), true);
  } else {
    // Ranks whose alignment limit or per-round power limit sits below the
    // cap; both lists ascend, so they form a prefix.
    int q_len = 0;
    while (q_len < n && (vec.c[q_len] < cap || vec.q[q_len] < cap)) ++q_len;

    for (int j = 1; j <= q_len; ++j) {
      if (mode == PowerMode::equal_power) {
        push_pair(j, std::min(vec.c[j - 1], vec.q[j - 1]), gain_suffix_ids(j - 1),
                  true);
      } else {
        const double c_s = vec.c[j - 1];
        const double q_j = vec.q[j - 1];
        std::vector<int> ids =
            (c_s <= q_j)
                ? std::vector<int>(vec.c_rank_to_id.begin() + (j - 1),
                                   vec.c_rank_to_id.end())
                : gain_suffix_ids(j - 1);
        push_pair(j, std::min(c_s, q_j), std::move(ids), true);
      }
    }
    if (q_len < n) {
      push_pair(q_len + 1, cap, gain_suffix_ids(q_len), true);
    }
    // q_len == n leaves the capped pair with an empty schedule; skipped.

    if (mode == PowerMode::heterogeneous) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& cand : candidates)
        if (cand.feasible) best = std::min(best, cand.psi);

      std::vector<const DeviceProfile*> by_c_rank(n);
      {
        std::unordered_map<int, const DeviceProfile*> by_id;
        for (const auto& dev : sorted) by_id.emplace(dev.id, &dev);
        for (int r = 0; r < n; ++r) by_c_rank[r] = by_id.at(vec.c_rank_to_id[r]);
      }
      for (int t = 0; t < n; ++t) {
        std::vector<const DeviceProfile*> pool(by_c_rank.begin() + t,
                                               by_c_rank.end());
        std::sort(pool.begin(), pool.end(),
                  [](const DeviceProfile* a, const DeviceProfile* b) {
                    if (a->channel_gain != b->channel_gain)
                      return a->channel_gain > b->channel_gain;
                    return a->id < b->id;
                  });
        double min_c = std::numeric_limits<double>::infinity();
        double inv_gain_sq = 0.0;
        std::vector<int> ids;
        ids.reserve(pool.size());
        for (std::size_t m = 0; m < pool.size(); ++m) {
          const DeviceProfile& dev = *pool[m];
          min_c = std::min(min_c, dev.channel_gain * std::sqrt(dev.peak_power));
          inv_gain_sq += 1.0 / (dev.channel_gain * dev.channel_gain);
          ids.push_back(dev.id);
          const double theta =
              std::min({cap, min_c, std::sqrt((sum_power / rounds) / inv_gain_sq)});
          const double psi =
              objective_psi(static_cast<int>(m) + 1, theta, params);
          if (psi < best) {
            push_pair(0, theta, ids, false);
            best = psi;
          }
        }
      }
    }
  }

  const CandidatePair* winner = nullptr;
  for (const auto& cand : candidates)
    if (cand.feasible && (winner == nullptr || cand.psi < winner->psi))
      winner = &cand;
  if (winner == nullptr) throw infeasible_error("solve_p2: no feasible schedule");
  return DeviceSelection{winner->schedule, winner->theta, std::move(candidates)};
}

// Optimal aggregation-round count for a fixed (schedule, alignment factor):
// exhaustive scan of the affordable integer range, ties to the smaller count.
inline int solve_p3(const std::vector<DeviceProfile>& fleet,
                    std::span<const int> schedule, double theta,
                    const SystemParams& params) {
  if (!(params.strong_convexity > 0.0))
    throw validation_error(
        "solve_p3: strong_convexity is 0; fix the round count explicitly in "
        "non-convex mode");
  if (schedule.empty()) throw validation_error("solve_p3: empty schedule");
  if (!(theta > 0.0)) throw validation_error("solve_p3: theta must be > 0");

  const double per_round = round_power(schedule, theta, fleet);
  // The division only seeds the search; the authoritative feasibility test is
  // the same product comparison the audits use.
  const double affordable = params.sum_power / per_round;
  int upper = params.total_rounds;
  if (affordable < static_cast<double>(upper))
    upper = std::min(upper, static_cast<int>(std::floor(affordable)) + 1);
  while (upper >= 1 && static_cast<double>(upper) * per_round > params.sum_power)
    --upper;
  if (upper < 1)
    throw infeasible_error(
        "solve_p3: sum power budget cannot fund a single aggregation round");

  int best_rounds = 1;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= upper; ++i) {
    const double w =
        objective_w(static_cast<int>(schedule.size()), theta, i, params);
    if (w < best) {
      best = w;
      best_rounds = i;
    }
  }
  return best_rounds;
}

enum class ParticipationVerdict { better, not_shown, undefined };

// Sufficient condition for a (schedule, alignment factor) pair to beat full
// participation. Undefined when the radical under the threshold is not
// positive; that is an answer, not an error.
inline ParticipationVerdict beats_full_participation(int schedule_size,
                                                     double theta,
                                                     const SystemParams& params,
                                                     double c1) {
  if (schedule_size < 1)
    throw validation_error("beats_full_participation: schedule_size must be >= 1");
  if (!(theta > 0.0))
    throw validation_error("beats_full_participation: theta must be > 0");
  if (!(c1 > 0.0))
    throw validation_error("beats_full_participation: c1 must be > 0");
  const double d_sigma_sq =
      params.model_dim * params.noise_std * params.noise_std;
  if (!(d_sigma_sq > 0.0)) return ParticipationVerdict::undefined;
  const double n_c = static_cast<double>(params.n_devices) * c1;
  const double radical = 1.0 / (n_c * n_c) - 8.0 / d_sigma_sq;
  if (!(radical > 0.0)) return ParticipationVerdict::undefined;
  const double threshold = 1.0 / std::sqrt(radical);
  return schedule_size * theta >= threshold ? ParticipationVerdict::better
                                            : ParticipationVerdict::not_shown;
}

struct SolverOptions {
  PowerMode mode = PowerMode::equal_power;
  double conv_tol = 1e-9;
  int max_iters = 50;
  int nonconvex_rounds = 0;  // 0: use params.total_rounds
};

// Full joint design. Strongly convex losses alternate the candidate search
// (which re-derives the per-round power limits at the current round count)
// with the round scan until the objective settles, keeping the best design
// seen. With strong_convexity == 0 the round count is fixed by the caller and
// only the candidate search runs; the reported objective is then the
// average-squared-gradient bound.
inline SchedulePlan solve_p1(const std::vector<DeviceProfile>& fleet,
                             const SystemParams& params,
                             const SolverOptions& opt = {}) {
  params.validate();
  if (opt.max_iters < 1)
    throw validation_error("solve_p1: max_iters must be >= 1");
  const std::vector<DeviceProfile> sorted = sort_devices(fleet);
  if (static_cast<int>(sorted.size()) != params.n_devices)
    throw validation_error("solve_p1: fleet size does not match params.n_devices");

  // A noiseless channel carries no mechanism, so the privacy constraint
  // cannot bind; the cap degenerates to infinity.
  const double cap =
      params.noise_std > 0.0
          ? alignment_cap(make_privacy_budget(params.epsilon, params.delta),
                          params.noise_std)
          : std::numeric_limits<double>::infinity();

  SchedulePlan plan;
  if (params.strong_convexity > 0.0) {
    int rounds = params.total_rounds;
    double prev_w = std::numeric_limits<double>::infinity();
    double best_w = std::numeric_limits<double>::infinity();
    DeviceSelection best_sel;
    int best_rounds = rounds;
    bool converged = false;
    int iters = 0;
    std::vector<double> trace;
    while (iters < opt.max_iters) {
      ++iters;
      DeviceSelection sel =
          solve_p2(sorted, cap, params.sum_power, rounds, opt.mode, params);
      // First pass measures progress against the incoming round count so the
      // stopping rule can fire after one full alternation.
      if (!std::isfinite(prev_w))
        prev_w = objective_w(static_cast<int>(sel.schedule.size()), sel.theta,
                             rounds, params);
      const int next_rounds = solve_p3(sorted, sel.schedule, sel.theta, params);
      const double w = objective_w(static_cast<int>(sel.schedule.size()),
                                   sel.theta, next_rounds, params);
      trace.push_back(w);
      if (w < best_w) {
        best_w = w;
        best_sel = std::move(sel);
        best_rounds = next_rounds;
      }
      if (std::abs(w - prev_w) <= opt.conv_tol) {
        converged = true;
        break;
      }
      prev_w = w;
      rounds = next_rounds;
    }
    plan.converged = converged;
    plan.iterations = iters;
    plan.objective_trace = std::move(trace);
    plan.schedule = best_sel.schedule;
    plan.theta = best_sel.theta;
    plan.rounds = best_rounds;
    plan.candidates = std::move(best_sel.candidates);
  } else {
    const int rounds =
        opt.nonconvex_rounds > 0 ? opt.nonconvex_rounds : params.total_rounds;
    if (rounds > params.total_rounds)
      throw validation_error(
          "solve_p1: nonconvex_rounds must not exceed total_rounds");
    DeviceSelection sel =
        solve_p2(sorted, cap, params.sum_power, rounds, opt.mode, params);
    plan.converged = true;
    plan.iterations = 1;
    plan.schedule = sel.schedule;
    plan.theta = sel.theta;
    plan.rounds = rounds;
    plan.candidates = std::move(sel.candidates);
  }

  plan.local_steps = params.total_rounds / plan.rounds;

  // The per-round power limit enters candidates through a square root; shave
  // ulps off theta until the round tally meets the budget under the same
  // arithmetic the audit uses.
  int guard = 0;
  while (plan.rounds * round_power(plan.schedule, plan.theta, sorted) >
         params.sum_power) {
    plan.theta = std::nextafter(plan.theta, 0.0);
    if (++guard > 256)
      throw infeasible_error("solve_p1: cannot satisfy the sum power budget");
  }

  plan.nu = plan.theta / params.grad_bound;
  plan.power_scaling =
      power_scaling_factors(plan.schedule, plan.nu, params.grad_bound, sorted);
  if (params.noise_std > 0.0)
    plan.per_round_epsilon = per_round_epsilon(params.grad_bound, plan.nu,
                                               params.noise_std, params.delta);
  if (params.strong_convexity > 0.0) {
    plan.predicted_objective = objective_w(
        static_cast<int>(plan.schedule.size()), plan.theta, plan.rounds, params);
  } else {
    plan.predicted_objective =
        avg_sq_gradient_bound(plan.rounds, static_cast<int>(plan.schedule.size()),
                              plan.theta, plan.local_steps, params);
  }
  if (plan.objective_trace.empty())
    plan.objective_trace.push_back(plan.predicted_objective);
  return plan;
}

}  // namespace otafl
