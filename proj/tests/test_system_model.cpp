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

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "otafl/system_model.hpp"
#include "test_fixtures.hpp"

using namespace otafl;
using Catch::Approx;

TEST_CASE("sort_devices orders ascending by gain", "[system_model]") {
  std::vector<DeviceProfile> fleet = {
      {1, 1.0, 1.0, -1}, {2, 0.1, 1.0, -1}, {3, 0.5, 1.0, -1}};
  const auto sorted = sort_devices(fleet);
  REQUIRE(sorted[0].channel_gain == 0.1);
  REQUIRE(sorted[1].channel_gain == 0.5);
  REQUIRE(sorted[2].channel_gain == 1.0);
}

TEST_CASE("sort_devices single device is identity", "[system_model]") {
  const auto sorted = sort_devices({{42, 0.7, 2.0, -1}});
  REQUIRE(sorted.size() == 1);
  REQUIRE(sorted[0].id == 42);
}

TEST_CASE("sort_devices breaks gain ties by id", "[system_model]") {
  const auto sorted = sort_devices({{7, 0.5, 1.0, -1}, {3, 0.5, 1.0, -1}});
  REQUIRE(sorted[0].id == 3);
  REQUIRE(sorted[1].id == 7);
}

TEST_CASE("sort_devices rejects empty and invalid fleets", "[system_model]") {
  REQUIRE_THROWS_AS(sort_devices({}), validation_error);
  REQUIRE_THROWS_AS(sort_devices({{1, 0.0, 1.0, -1}}), validation_error);
  REQUIRE_THROWS_AS(sort_devices({{1, 0.5, 0.0, -1}}), validation_error);
}

TEST_CASE("channel vectors match the reference instance", "[system_model]") {
  const auto sorted = sort_devices(test::reference_fleet());
  // per-round share of 3 W
  const auto vec = compute_channel_vectors(sorted, 3.0, 1, PowerMode::equal_power);
  REQUIRE(vec.c[0] == Approx(0.1).epsilon(1e-12));
  REQUIRE(vec.c[1] == Approx(0.5).epsilon(1e-12));
  REQUIRE(vec.c[2] == Approx(1.0).epsilon(1e-12));
  REQUIRE(vec.q[0] == Approx(0.169030850945703316).epsilon(1e-12));
  REQUIRE(vec.q[1] == Approx(0.774596669241483377).epsilon(1e-12));
  REQUIRE(vec.q[2] == Approx(1.732050807568877294).epsilon(1e-12));
  REQUIRE(vec.round_count_used == 1);
  REQUIRE(vec.h_order_ids == std::vector<int>{1, 2, 3});
}

TEST_CASE("channel vectors single-device degenerate case", "[system_model]") {
  const auto vec = compute_channel_vectors({{1, 1.0, 1.0, -1}}, 1.0, 1,
                                           PowerMode::equal_power);
  REQUIRE(vec.c == std::vector<double>{1.0});
  REQUIRE(vec.q[0] == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("doubling the round count scales q by 1/sqrt(2)", "[system_model]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> gain(0.05, 2.0);
  std::vector<DeviceProfile> fleet;
  for (int i = 0; i < 6; ++i) fleet.push_back({i, gain(rng), 1.0, -1});
  const auto sorted = sort_devices(fleet);
  const auto one = compute_channel_vectors(sorted, 12.0, 3, PowerMode::equal_power);
  const auto two = compute_channel_vectors(sorted, 12.0, 6, PowerMode::equal_power);
  for (int i = 0; i < 6; ++i) {
    REQUIRE(two.q[i] == Approx(one.q[i] / std::sqrt(2.0)).epsilon(1e-12));
    REQUIRE(two.c[i] == one.c[i]);
  }
}

TEST_CASE("channel vectors validate their inputs", "[system_model]") {
  const auto sorted = sort_devices(test::reference_fleet());
  REQUIRE_THROWS_AS(compute_channel_vectors(sorted, 3.0, 0, PowerMode::equal_power),
                    validation_error);
  auto unsorted = test::reference_fleet();
  std::swap(unsorted[0], unsorted[2]);
  std::swap(unsorted[0], unsorted[1]);  // gains now 0.5, 1.0, 0.1
  REQUIRE_THROWS_AS(
      compute_channel_vectors(unsorted, 3.0, 1, PowerMode::equal_power),
      validation_error);
  auto mixed = sorted;
  mixed[1].peak_power = 2.0;
  REQUIRE_THROWS_AS(compute_channel_vectors(mixed, 3.0, 1, PowerMode::equal_power),
                    validation_error);
  REQUIRE_NOTHROW(compute_channel_vectors(mixed, 3.0, 1, PowerMode::heterogeneous));
}

TEST_CASE("heterogeneous mode sorts c and keeps the permutation", "[system_model]") {
  // gains ascending but peak powers reverse the c ordering
  std::vector<DeviceProfile> fleet = {
      {1, 0.2, 9.0, -1}, {2, 0.5, 1.0, -1}, {3, 1.0, 0.04, -1}};
  const auto sorted = sort_devices(fleet);
  const auto vec = compute_channel_vectors(sorted, 4.0, 1, PowerMode::heterogeneous);
  // c values by device: 0.6, 0.5, 0.2 -> sorted 0.2, 0.5, 0.6
  REQUIRE(vec.c[0] == Approx(0.2).epsilon(1e-12));
  REQUIRE(vec.c[1] == Approx(0.5).epsilon(1e-12));
  REQUIRE(vec.c[2] == Approx(0.6).epsilon(1e-12));
  REQUIRE(vec.c_rank_to_id == std::vector<int>{3, 2, 1});
  REQUIRE(std::is_sorted(vec.q.begin(), vec.q.end()));
}

TEST_CASE("theta_max evaluates arbitrary subsets", "[system_model]") {
  const auto fleet = test::reference_fleet();
  SECTION("reference subset") {
    const std::vector<int> subset = {2, 3};
    REQUIRE(theta_max(fleet, subset, 10.0, 3.0, 1) == Approx(0.5).epsilon(1e-12));
  }
  SECTION("cap binds") {
    const std::vector<int> subset = {2, 3};
    REQUIRE(theta_max(fleet, subset, 0.01, 3.0, 1) == 0.01);
  }
  SECTION("full set with huge cap hits min(c1, q1)") {
    const std::vector<int> subset = {1, 2, 3};
    REQUIRE(theta_max(fleet, subset, 1e9, 3.0, 1) ==
            Approx(0.1).epsilon(1e-12));  // c1 < q1 here
  }
  SECTION("empty subset is rejected") {
    REQUIRE_THROWS_AS(theta_max(fleet, std::vector<int>{}, 1.0, 3.0, 1),
                      validation_error);
  }
}

TEST_CASE("theta_max shrinks as the subset grows", "[system_model]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> gain(0.05, 2.0);
  std::uniform_real_distribution<double> power(0.5, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DeviceProfile> fleet;
    for (int i = 0; i < 8; ++i) fleet.push_back({i, gain(rng), power(rng), -1});
    std::vector<int> subset = {0};
    double prev = theta_max(fleet, subset, 3.0, 10.0, 2);
    for (int i = 1; i < 8; ++i) {
      subset.push_back(i);
      const double next = theta_max(fleet, subset, 3.0, 10.0, 2);
      REQUIRE(next <= prev * (1.0 + 1e-12));
      prev = next;
    }
  }
}

TEST_CASE("theta_max of top-k sets matches the channel vectors", "[system_model]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> gain(0.05, 2.0);
  std::vector<DeviceProfile> fleet;
  const int n = 7;
  for (int i = 0; i < n; ++i) fleet.push_back({i + 1, gain(rng), 1.5, -1});
  const auto sorted = sort_devices(fleet);
  const auto vec = compute_channel_vectors(sorted, 9.0, 4, PowerMode::equal_power);
  const double cap = 0.8;
  for (int k = 1; k <= n; ++k) {
    std::vector<int> top_k(vec.h_order_ids.end() - k, vec.h_order_ids.end());
    const double direct = theta_max(fleet, top_k, cap, 9.0, 4);
    const double from_vectors = std::min({cap, vec.c[n - k], vec.q[n - k]});
    REQUIRE(direct == Approx(from_vectors).epsilon(1e-12));
  }
}

TEST_CASE("params validation catches bad constants", "[system_model]") {
  auto p = test::reference_params();
  REQUIRE_NOTHROW(p.validate());
  SECTION("learning rate above 1/smoothness") {
    p.learning_rate = 1.5;
    REQUIRE_THROWS_AS(p.validate(), validation_error);
  }
  SECTION("strong convexity above smoothness") {
    p.strong_convexity = 2.0;
    REQUIRE_THROWS_AS(p.validate(), validation_error);
  }
  SECTION("delta outside (0,1)") {
    p.delta = 1.0;
    REQUIRE_THROWS_AS(p.validate(), validation_error);
  }
  SECTION("noiseless channel is allowed") {
    p.noise_std = 0.0;
    REQUIRE_NOTHROW(p.validate());
  }
}
