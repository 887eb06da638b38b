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

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "otafl/io.hpp"
#include "test_fixtures.hpp"

using namespace otafl;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

json reference_config() {
  json cfg;
  cfg["system"] = {{"noise_std", 1.0},
                   {"sum_power", 30.0},
                   {"total_rounds", 20},
                   {"grad_bound", 1.0}};
  cfg["privacy"] = {{"epsilon", 100.0}, {"delta", 0.0125}};
  cfg["fleet"] = json::array({{{"id", 1}, {"channel_gain", 0.1}},
                              {{"id", 2}, {"channel_gain", 0.5}},
                              {{"id", 3}, {"channel_gain", 1.0}}});
  cfg["model"] = {{"kind", "quadratic"}, {"dim", 4}, {"seed", 7}, {"spread", 1.0}};
  return cfg;
}

}  // namespace

TEST_CASE("fleet parsing names the offending record", "[io]") {
  SECTION("valid fleet with defaulted peak power") {
    const auto fleet = parse_fleet(reference_config()["fleet"]);
    REQUIRE(fleet.size() == 3);
    REQUIRE(fleet[0].peak_power == 1.0);
  }
  SECTION("zero gain") {
    json arr = json::array({{{"id", 1}, {"channel_gain", 0.0}}});
    REQUIRE_THROWS_WITH(parse_fleet(arr), ContainsSubstring("fleet[0]"));
  }
  SECTION("missing field") {
    json arr = json::array({{{"id", 1}}});
    REQUIRE_THROWS_WITH(parse_fleet(arr), ContainsSubstring("fleet[0]"));
  }
  SECTION("duplicate id") {
    json arr = json::array({{{"id", 4}, {"channel_gain", 0.5}},
                            {{"id", 4}, {"channel_gain", 0.6}}});
    REQUIRE_THROWS_WITH(parse_fleet(arr), ContainsSubstring("duplicate"));
  }
}

TEST_CASE("experiment assembly applies the documented defaults", "[io]") {
  auto cfg = reference_config();
  const auto exp = build_experiment(cfg);
  REQUIRE(exp.params.n_devices == 3);
  REQUIRE(exp.params.model_dim == 4);
  // learning rate defaults to 1/smoothness
  REQUIRE(exp.params.learning_rate ==
          Approx(1.0 / exp.params.smoothness).epsilon(1e-12));
  REQUIRE(exp.solver.mode == PowerMode::equal_power);
  REQUIRE(exp.seed == 1);
  // devices take dataset slots in ascending id order
  for (std::size_t i = 0; i < exp.fleet.size(); ++i)
    REQUIRE(exp.fleet[i].dataset_ref == static_cast<int>(i));

  SECTION("total_rounds defaults to 200") {
    cfg["system"].erase("total_rounds");
    REQUIRE(build_experiment(cfg).params.total_rounds == 200);
  }
  SECTION("mixed peak powers flip auto mode to heterogeneous") {
    cfg["fleet"][1]["peak_power"] = 2.0;
    REQUIRE(build_experiment(cfg).solver.mode == PowerMode::heterogeneous);
  }
  SECTION("explicit power mode wins") {
    cfg["solver"] = {{"power_mode", "heterogeneous"}};
    REQUIRE(build_experiment(cfg).solver.mode == PowerMode::heterogeneous);
  }
  SECTION("missing sections are reported") {
    cfg.erase("privacy");
    REQUIRE_THROWS_AS(build_experiment(cfg), validation_error);
  }
}

TEST_CASE("plan serialization round-trips", "[io]") {
  const auto plan =
      solve_p1(test::reference_fleet(), test::reference_params(), {});
  const json j = plan_to_json(plan);
  const auto back = plan_from_json(j);
  REQUIRE(back.schedule == plan.schedule);
  REQUIRE(back.theta == plan.theta);
  REQUIRE(back.nu == plan.nu);
  REQUIRE(back.rounds == plan.rounds);
  REQUIRE(back.local_steps == plan.local_steps);
  REQUIRE(back.power_scaling == plan.power_scaling);
  REQUIRE(back.predicted_objective == plan.predicted_objective);
  REQUIRE(back.candidates.size() == plan.candidates.size());
  for (std::size_t i = 0; i < plan.candidates.size(); ++i) {
    REQUIRE(back.candidates[i].schedule == plan.candidates[i].schedule);
    REQUIRE(back.candidates[i].theta == plan.candidates[i].theta);
    REQUIRE(back.candidates[i].psi == plan.candidates[i].psi);
  }
  // serialization itself is deterministic
  REQUIRE(j.dump(2) == plan_to_json(plan).dump(2));

  SECTION("missing required fields are validation errors") {
    json broken = j;
    broken.erase("theta");
    REQUIRE_THROWS_AS(plan_from_json(broken), validation_error);
  }
}

TEST_CASE("metrics CSV format", "[io]") {
  RoundMetrics row;
  row.round_index = 0;
  row.global_loss = 1.5;
  row.optimality_gap = 0.25;
  row.grad_norm_sq = 0.125;
  row.clip_activations = 0;
  row.power_spent = 1.25;
  row.epsilon_this_round = 3.0348542587702927;
  RoundMetrics row2;
  row2.round_index = 1;
  row2.global_loss = 0.75;
  row2.grad_norm_sq = 0.0625;
  row2.clip_activations = 2;
  row2.power_spent = 1.25;
  row2.epsilon_this_round = std::numeric_limits<double>::infinity();
  const std::vector<RoundMetrics> rounds = {row, row2};
  const std::string expected =
      "round,loss,gap,grad_norm_sq,clips,power_watts,epsilon\n"
      "0,1.5,0.25,0.125,0,1.25,3.03485425877\n"
      "1,0.75,,0.0625,2,1.25,inf\n";
  REQUIRE(metrics_to_csv(rounds) == expected);
}

TEST_CASE("json files load with path context in errors", "[io]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "otafl_io_test";
  fs::create_directories(dir);
  SECTION("missing file") {
    REQUIRE_THROWS_WITH(load_json_file(dir / "absent.json"),
                        ContainsSubstring("absent.json"));
  }
  SECTION("malformed json") {
    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    REQUIRE_THROWS_AS(load_json_file(bad), validation_error);
  }
  SECTION("fleet_file is resolved against the config directory") {
    const fs::path fleet_path = dir / "fleet.json";
    std::ofstream(fleet_path) << reference_config()["fleet"].dump();
    json cfg = reference_config();
    cfg.erase("fleet");
    cfg["fleet_file"] = "fleet.json";
    const auto exp = build_experiment(cfg, dir);
    REQUIRE(exp.fleet.size() == 3);
  }
  fs::remove_all(dir);
}
