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
// Desk-scale synthetic training problems. The quadratic family has an exact
// optimum and exact curvature constants; the regularized logistic family
// covers the case where only bounds on them are available.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "otafl/errors.hpp"
#include "otafl/vec_math.hpp"

namespace otafl {

// Callable view of one training problem split across devices. Device k's
// functions close over its local dataset; the global loss averages the local
// ones with equal weights.
struct ModelSpec {
  int dim = 0;
  std::function<double(std::span<const double>)> loss;
  std::vector<std::function<double(std::span<const double>)>> local_loss;
  std::vector<std::function<Vec(std::span<const double>)>> local_gradient;
  std::optional<Vec> optimum;
  std::optional<double> optimal_value;
  double smoothness = 0.0;
  double strong_convexity = 0.0;

  int n_parties() const { return static_cast<int>(local_gradient.size()); }

  Vec global_gradient(std::span<const double> m) const {
    Vec g(dim, 0.0);
    for (const auto& grad : local_gradient) add_scaled(g, 1.0, grad(m));
    const double inv = 1.0 / static_cast<double>(local_gradient.size());
    for (double& x : g) x *= inv;
    return g;
  }
};

struct SyntheticFleet {
  std::vector<std::vector<Vec>> datasets;  // per-device sample vectors
  ModelSpec model;
  double initial_gap = 0.0;  // loss(0) - optimal value; an upper bound when
                             // the optimum is not known in closed form
};

enum class ModelKind { quadratic, logistic };

struct SyntheticModelOptions {
  int samples_per_device = 8;
  double curvature_min = 1.0;   // quadratic: smallest Hessian eigenvalue
  double curvature_max = 4.0;   // quadratic: largest Hessian eigenvalue
  double regularization = 0.1;  // logistic: L2 weight (its convexity constant)
};

namespace detail {

inline Vec random_ball_point(int dim, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec x(dim);
  for (double& v : x) v = gauss(rng);
  const double n = norm(x);
  const double r = radius * std::pow(unit(rng), 1.0 / dim);
  const double s = n > 0.0 ? r / n : 0.0;
  for (double& v : x) v *= s;
  return x;
}

// Largest eigenvalue of the average outer-product matrix of `points`, by
// power iteration to the given relative tolerance.
inline double gram_spectral_norm(const std::vector<const Vec*>& points, int dim,
                                 std::mt19937_64& rng, double tol = 1e-6) {
  if (points.empty()) return 0.0;
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(dim);
  for (double& x : v) x = gauss(rng);
  double lambda = 0.0;
  const double inv_count = 1.0 / static_cast<double>(points.size());
  for (int iter = 0; iter < 10000; ++iter) {
    Vec next(dim, 0.0);
    for (const Vec* p : points) add_scaled(next, dot(*p, v) * inv_count, *p);
    const double next_norm = norm(next);
    if (next_norm == 0.0) return 0.0;
    for (double& x : next) x /= next_norm;
    const double estimate = [&] {
      Vec av(dim, 0.0);
      for (const Vec* p : points) add_scaled(av, dot(*p, next) * inv_count, *p);
      return dot(av, next);
    }();
    if (iter > 0 && std::abs(estimate - lambda) <= tol * std::abs(estimate)) {
      lambda = estimate;
      break;
    }
    lambda = estimate;
    v = std::move(next);
  }
  return lambda;
}

}  // namespace detail

// Builds an IID synthetic fleet of n_devices equally sized local datasets.
//
// quadratic: per-sample loss 0.5 (m - x)^T A (m - x) with a shared diagonal
// positive-definite A whose eigenvalues span [curvature_min, curvature_max];
// sample centers are drawn from the radius-`spread` ball. Optimum, optimal
// value, and the initial gap at m0 = 0 are exact.
//
// logistic: two-Gaussian-blob binary classification with L2 regularization.
// strong_convexity equals the regularization weight; smoothness is an upper
// bound from the data Gram spectral norm (power iteration, tolerance 1e-6)
// plus regularization. The optimum is unknown, so the initial gap reported is
// the upper bound loss(0) = ln 2 (the loss is nonnegative).
inline SyntheticFleet make_synthetic_fleet(ModelKind kind, int n_devices,
                                           int dim, std::uint64_t seed,
                                           double spread,
                                           const SyntheticModelOptions& opt = {}) {
  if (n_devices < 1)
    throw validation_error("make_synthetic_fleet: n_devices must be >= 1");
  if (dim < 1) throw validation_error("make_synthetic_fleet: dim must be >= 1");
  if (!(spread > 0.0))
    throw validation_error("make_synthetic_fleet: spread must be > 0");
  if (opt.samples_per_device < 1)
    throw validation_error("make_synthetic_fleet: samples_per_device must be >= 1");

  std::mt19937_64 rng(seed);
  SyntheticFleet fleet;
  fleet.model.dim = dim;

  if (kind == ModelKind::quadratic) {
    if (!(opt.curvature_min > 0.0) || opt.curvature_max < opt.curvature_min)
      throw validation_error(
          "make_synthetic_fleet: need 0 < curvature_min <= curvature_max");
    auto curvature = std::make_shared<Vec>(dim);
    for (int i = 0; i < dim; ++i)
      (*curvature)[i] =
          dim == 1 ? opt.curvature_min
                   : opt.curvature_min + (opt.curvature_max - opt.curvature_min) *
                                             i / (dim - 1.0);
    fleet.model.strong_convexity = opt.curvature_min;
    fleet.model.smoothness = dim == 1 ? opt.curvature_min : opt.curvature_max;

    fleet.datasets.resize(n_devices);
    for (auto& data : fleet.datasets) {
      const Vec center = detail::random_ball_point(dim, spread, rng);
      data.reserve(opt.samples_per_device);
      for (int s = 0; s < opt.samples_per_device; ++s) {
        Vec x = detail::random_ball_point(dim, 0.1 * spread, rng);
        add_scaled(x, 1.0, center);
        data.push_back(std::move(x));
      }
    }

    auto quad_loss = [curvature](std::span<const double> m, const Vec& x) {
      double s = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double r = m[i] - x[i];
        s += (*curvature)[i] * r * r;
      }
      return 0.5 * s;
    };

    std::vector<Vec> device_means(n_devices, Vec(dim, 0.0));
    Vec global_mean(dim, 0.0);
    for (int k = 0; k < n_devices; ++k) {
      for (const Vec& x : fleet.datasets[k])
        add_scaled(device_means[k], 1.0 / opt.samples_per_device, x);
      add_scaled(global_mean, 1.0 / n_devices, device_means[k]);
    }

    for (int k = 0; k < n_devices; ++k) {
      const auto data = std::make_shared<std::vector<Vec>>(fleet.datasets[k]);
      fleet.model.local_loss.push_back([quad_loss, data](std::span<const double> m) {
        double s = 0.0;
        for (const Vec& x : *data) s += quad_loss(m, x);
        return s / data->size();
      });
      const auto mean = std::make_shared<Vec>(device_means[k]);
      fleet.model.local_gradient.push_back(
          [curvature, mean](std::span<const double> m) {
            Vec g(m.size());
            for (std::size_t i = 0; i < m.size(); ++i)
              g[i] = (*curvature)[i] * (m[i] - (*mean)[i]);
            return g;
          });
    }

    // Global loss in closed form around the grand sample mean; the constant
    // term is the average within-spread energy.
    double constant = 0.0;
    for (const auto& data : fleet.datasets)
      for (const Vec& x : data) constant += quad_loss(global_mean, x);
    constant /= static_cast<double>(n_devices) * opt.samples_per_device;
    const auto center = std::make_shared<Vec>(global_mean);
    fleet.model.loss = [curvature, center, constant](std::span<const double> m) {
      double s = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double r = m[i] - (*center)[i];
        s += (*curvature)[i] * r * r;
      }
      return 0.5 * s + constant;
    };
    fleet.model.optimum = global_mean;
    fleet.model.optimal_value = constant;
    fleet.initial_gap = fleet.model.loss(Vec(dim, 0.0)) - constant;
  } else {
    if (!(opt.regularization >= 0.0))
      throw validation_error("make_synthetic_fleet: regularization must be >= 0");
    const double reg = opt.regularization;
    Vec direction = detail::random_ball_point(dim, 1.0, rng);
    const double dir_norm = norm(direction);
    if (dir_norm > 0.0)
      for (double& v : direction) v /= dir_norm;
    else
      direction[0] = 1.0;

    std::normal_distribution<double> gauss(0.0, 1.0);
    fleet.datasets.resize(n_devices);
    std::vector<double> labels_flat;
    for (auto& data : fleet.datasets) {
      for (int s = 0; s < opt.samples_per_device; ++s) {
        const double label = (s % 2 == 0) ? 1.0 : -1.0;
        Vec x(dim);
        for (int i = 0; i < dim; ++i)
          x[i] = label * spread * direction[i] + gauss(rng);
        data.push_back(std::move(x));
        labels_flat.push_back(label);
      }
    }

    // Labels recoverable from sample parity keeps the dataset type uniform
    // across model kinds; stash them per device for the closures.
    const int per_dev = opt.samples_per_device;
    for (int k = 0; k < n_devices; ++k) {
      auto data = std::make_shared<std::vector<Vec>>(fleet.datasets[k]);
      auto labels = std::make_shared<Vec>(
          labels_flat.begin() + static_cast<std::ptrdiff_t>(k) * per_dev,
          labels_flat.begin() + static_cast<std::ptrdiff_t>(k + 1) * per_dev);
      fleet.model.local_loss.push_back(
          [data, labels, reg](std::span<const double> m) {
            double s = 0.0;
            for (std::size_t i = 0; i < data->size(); ++i) {
              const double margin = -(*labels)[i] * dot((*data)[i], m);
              s += margin > 30.0 ? margin : std::log1p(std::exp(margin));
            }
            return s / data->size() + 0.5 * reg * squared_norm(m);
          });
      fleet.model.local_gradient.push_back(
          [data, labels, reg](std::span<const double> m) {
            Vec g(m.size(), 0.0);
            for (std::size_t i = 0; i < data->size(); ++i) {
              const double margin = -(*labels)[i] * dot((*data)[i], m);
              const double sig = 1.0 / (1.0 + std::exp(-margin));
              add_scaled(g, -(*labels)[i] * sig / data->size(), (*data)[i]);
            }
            for (std::size_t i = 0; i < m.size(); ++i) g[i] += reg * m[i];
            return g;
          });
    }

    const auto locals = fleet.model.local_loss;
    fleet.model.loss = [locals](std::span<const double> m) {
      double s = 0.0;
      for (const auto& l : locals) s += l(m);
      return s / locals.size();
    };

    std::vector<const Vec*> all_samples;
    for (const auto& data : fleet.datasets)
      for (const Vec& x : data) all_samples.push_back(&x);
    const double gram = detail::gram_spectral_norm(all_samples, dim, rng);
    fleet.model.smoothness = 0.25 * gram * (1.0 + 1e-4) + reg;
    fleet.model.strong_convexity = reg;
    fleet.initial_gap = std::log(2.0);  // loss(0); the loss is nonnegative
  }
  return fleet;
}

}  // namespace otafl
