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

#include <stdexcept>

namespace otafl {

// Error taxonomy mirrored by the CLI exit codes.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input, violated precondition, or an unusable parameter combination.
struct validation_error : error {
  using error::error;
};

// Well-formed problem with no feasible solution (schedule, alignment, rounds).
struct infeasible_error : error {
  using error::error;
};

// Solver and brute-force verifier disagree.
struct oracle_mismatch_error : error {
  using error::error;
};

// Non-finite values encountered during training or aggregation.
struct numerical_error : error {
  using error::error;
};

}  // namespace otafl
