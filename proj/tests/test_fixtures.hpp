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

#include <vector>

#include "otafl/system_model.hpp"

namespace otafl::test {

// Three-device fleet used throughout: gains 0.1 / 0.5 / 1.0, 1 W each.
inline std::vector<DeviceProfile> reference_fleet() {
  return {{1, 0.1, 1.0, 0}, {2, 0.5, 1.0, 1}, {3, 1.0, 1.0, 2}};
}

// Matching constants: d = 4, unit noise, non-binding privacy budget.
inline SystemParams reference_params() {
  SystemParams p;
  p.n_devices = 3;
  p.model_dim = 4;
  p.noise_std = 1.0;
  p.epsilon = 100.0;
  p.delta = 0.0125;
  p.sum_power = 30.0;
  p.total_rounds = 20;
  p.grad_bound = 1.0;
  p.smoothness = 1.0;
  p.strong_convexity = 0.5;
  p.learning_rate = 1.0;
  p.initial_gap = 1.0;
  return p;
}

}  // namespace otafl::test
