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
// Closed-form evaluators for the analytic convergence bounds. Expectations in
// every bound are over channel noise only; the simulator estimates them by
// averaging runs over seeds.

#pragma once

#include <cmath>
#include <string>

#include "otafl/errors.hpp"
#include "otafl/system_model.hpp"

namespace otafl {

enum class BoundKind { descent, convex_gap, noiseless_gap, nonconvex_avg_grad };

inline std::string bound_kind_name(BoundKind kind) {
  switch (kind) {
    case BoundKind::descent: return "descent";
    case BoundKind::convex_gap: return "convex-gap";
    case BoundKind::noiseless_gap: return "noiseless-gap";
    case BoundKind::nonconvex_avg_grad: return "nonconvex-avg-grad";
  }
  return "unknown";
}

// A bound evaluation together with the inputs it was evaluated at.
struct BoundReport {
  BoundKind kind = BoundKind::convex_gap;
  double value = 0.0;
  int rounds = 0;
  int schedule_size = 0;
  int local_steps = 0;
  double theta = 0.0;
  SystemParams params;
};

namespace detail {

inline void check_schedule_theta(int schedule_size, double theta,
                                 const char* where) {
  if (schedule_size < 1)
    throw validation_error(std::string(where) + ": schedule_size must be >= 1");
  if (!(theta > 0.0))
    throw validation_error(std::string(where) + ": theta must be > 0");
}

// Shared core of the strongly convex gap bound; local_steps enters as a
// continuous quantity so the round optimizer and the integer-step bound agree
// bit for bit when they coincide.
inline double convex_gap_core(int rounds, int schedule_size, double theta,
                              double local_steps, const SystemParams& p) {
  if (!(p.strong_convexity > 0.0))
    throw validation_error(
        "convex gap bound: strong_convexity is 0; use avg_sq_gradient_bound");
  if (rounds < 1)
    throw validation_error("convex gap bound: rounds must be >= 1");
  check_schedule_theta(schedule_size, theta, "convex gap bound");

  const double eta = p.convergence_coeff();
  const double decay = std::pow(eta, rounds);
  const double part = 1.0 - static_cast<double>(schedule_size) / p.n_devices;
  const double kt = schedule_size * theta;
  const double bracket = 4.0 * part * part +
                         (local_steps - 1.0) * (local_steps - 1.0) +
                         0.5 * p.model_dim * p.noise_std * p.noise_std / (kt * kt);
  return decay * p.initial_gap +
         (p.grad_bound * p.grad_bound / p.strong_convexity) * (1.0 - decay) * bracket;
}

}  // namespace detail

// Expected one-round change of the global loss (an upper bound; negative means
// guaranteed descent). Uses the raw alignment coefficient nu, not theta.
inline double descent_bound(double grad_norm_sq, const SystemParams& p,
                            int schedule_size, double nu, int local_steps) {
  if (!(grad_norm_sq >= 0.0))
    throw validation_error("descent_bound: grad_norm_sq must be >= 0");
  detail::check_schedule_theta(schedule_size, nu, "descent_bound");
  if (local_steps < 1)
    throw validation_error("descent_bound: local_steps must be >= 1");
  const double tau = p.learning_rate;
  const double w2 = p.grad_bound * p.grad_bound;
  const double part = 1.0 - static_cast<double>(schedule_size) / p.n_devices;
  const double steps = local_steps - 1.0;
  const double k_nu = schedule_size * nu;
  return -(tau / 2.0) * grad_norm_sq + tau * w2 * steps * steps +
         4.0 * tau * w2 * part * part +
         (p.smoothness * tau * tau / 2.0) * p.model_dim * p.noise_std *
             p.noise_std / (k_nu * k_nu);
}

// Expected optimality gap after `rounds` aggregations under strong convexity,
// at learning rate 1/smoothness.
inline double optimality_gap_bound(int rounds, int schedule_size, double theta,
                                   int local_steps, const SystemParams& p) {
  if (local_steps < 1)
    throw validation_error("optimality_gap_bound: local_steps must be >= 1");
  return detail::convex_gap_core(rounds, schedule_size, theta,
                                 static_cast<double>(local_steps), p);
}

// Gap of the classical noiseless, full-participation, one-local-step baseline.
inline double noiseless_gap_bound(int total_rounds, double initial_gap,
                                  double strong_convexity, double smoothness) {
  if (total_rounds < 0)
    throw validation_error("noiseless_gap_bound: total_rounds must be >= 0");
  if (!(smoothness > 0.0))
    throw validation_error("noiseless_gap_bound: smoothness must be > 0");
  if (!(strong_convexity >= 0.0) || strong_convexity > smoothness * (1.0 + 1e-12))
    throw validation_error(
        "noiseless_gap_bound: need 0 <= strong_convexity <= smoothness");
  if (!(initial_gap >= 0.0))
    throw validation_error("noiseless_gap_bound: initial_gap must be >= 0");
  return std::pow(1.0 - strong_convexity / smoothness, total_rounds) * initial_gap;
}

// Average squared gradient norm over `rounds` aggregations; valid without
// convexity. Its bracket is exactly twice the convex bound's bracket.
inline double avg_sq_gradient_bound(int rounds, int schedule_size, double theta,
                                    int local_steps, const SystemParams& p) {
  if (rounds < 1)
    throw validation_error("avg_sq_gradient_bound: rounds must be >= 1");
  detail::check_schedule_theta(schedule_size, theta, "avg_sq_gradient_bound");
  if (local_steps < 1)
    throw validation_error("avg_sq_gradient_bound: local_steps must be >= 1");
  const double part = 1.0 - static_cast<double>(schedule_size) / p.n_devices;
  const double steps = local_steps - 1.0;
  const double kt = schedule_size * theta;
  const double bracket = 8.0 * part * part + 2.0 * steps * steps +
                         p.model_dim * p.noise_std * p.noise_std / (kt * kt);
  return 2.0 * p.initial_gap / (p.learning_rate * rounds) +
         p.grad_bound * p.grad_bound * bracket;
}

}  // namespace otafl
