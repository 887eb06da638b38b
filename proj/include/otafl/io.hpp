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
// Config, fleet, and plan files are JSON; round metrics stream to CSV with 12
// significant digits. All serialization is deterministic.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "otafl/bounds.hpp"
#include "otafl/errors.hpp"
#include "otafl/fedavg.hpp"
#include "otafl/models.hpp"
#include "otafl/oracle.hpp"
#include "otafl/scheduler.hpp"
#include "otafl/system_model.hpp"

namespace otafl {

using json = nlohmann::json;

inline json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw validation_error("cannot open file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw validation_error("failed to parse " + path.string() + ": " + e.what());
  }
}

// Fleet ingestion: array of {id, channel_gain, peak_power}. peak_power
// defaults to 1 W. Validation errors name the offending record.
inline std::vector<DeviceProfile> parse_fleet(const json& arr) {
  if (!arr.is_array() || arr.empty())
    throw validation_error("fleet: expected a non-empty array of devices");
  std::vector<DeviceProfile> fleet;
  fleet.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& rec = arr[i];
    const std::string where = "fleet[" + std::to_string(i) + "]";
    if (!rec.is_object()) throw validation_error(where + ": expected an object");
    DeviceProfile dev;
    try {
      dev.id = rec.at("id").get<int>();
      dev.channel_gain = rec.at("channel_gain").get<double>();
      dev.peak_power = rec.value("peak_power", 1.0);
    } catch (const json::exception& e) {
      throw validation_error(where + ": " + e.what());
    }
    validate_device(dev, where + " (id " + std::to_string(dev.id) + ")");
    for (const auto& other : fleet)
      if (other.id == dev.id)
        throw validation_error(where + ": duplicate device id " +
                               std::to_string(dev.id));
    fleet.push_back(dev);
  }
  return fleet;
}

// Everything a subcommand needs, assembled from one config document.
struct Experiment {
  std::vector<DeviceProfile> fleet;
  SyntheticFleet synth;
  SystemParams params;
  SolverOptions solver;
  std::uint64_t seed = 1;
};

inline Experiment build_experiment(const json& config,
                                   const std::filesystem::path& base_dir = {}) {
  if (!config.is_object())
    throw validation_error("config: expected a JSON object");
  Experiment exp;
  try {
    const json& system = config.at("system");
    const json& privacy = config.at("privacy");
    const json& model = config.at("model");
    const json solver = config.value("solver", json::object());

    if (config.contains("fleet")) {
      exp.fleet = parse_fleet(config.at("fleet"));
    } else if (config.contains("fleet_file")) {
      const std::filesystem::path p =
          base_dir / config.at("fleet_file").get<std::string>();
      exp.fleet = parse_fleet(load_json_file(p));
    } else {
      throw validation_error("config: need either fleet or fleet_file");
    }

    const std::string kind_name = model.at("kind").get<std::string>();
    ModelKind kind;
    if (kind_name == "quadratic") kind = ModelKind::quadratic;
    else if (kind_name == "logistic") kind = ModelKind::logistic;
    else throw validation_error("config: model.kind must be quadratic or logistic");

    SyntheticModelOptions mopt;
    mopt.samples_per_device = model.value("samples_per_device", 8);
    mopt.curvature_min = model.value("curvature_min", 1.0);
    mopt.curvature_max = model.value("curvature_max", 4.0);
    mopt.regularization = model.value("regularization", 0.1);
    exp.synth = make_synthetic_fleet(kind, static_cast<int>(exp.fleet.size()),
                                     model.at("dim").get<int>(),
                                     model.value("seed", std::uint64_t{1}),
                                     model.value("spread", 1.0), mopt);

    // Devices take dataset slots in ascending id order.
    {
      std::vector<int> ids;
      for (const auto& dev : exp.fleet) ids.push_back(dev.id);
      std::sort(ids.begin(), ids.end());
      for (auto& dev : exp.fleet)
        dev.dataset_ref = static_cast<int>(
            std::find(ids.begin(), ids.end(), dev.id) - ids.begin());
    }

    SystemParams& p = exp.params;
    p.n_devices = static_cast<int>(exp.fleet.size());
    p.model_dim = exp.synth.model.dim;
    p.noise_std = system.at("noise_std").get<double>();
    p.epsilon = privacy.at("epsilon").get<double>();
    p.delta = privacy.at("delta").get<double>();
    p.sum_power = system.at("sum_power").get<double>();
    p.total_rounds = system.value("total_rounds", 200);
    p.grad_bound = system.at("grad_bound").get<double>();
    p.smoothness = exp.synth.model.smoothness;
    p.strong_convexity = exp.synth.model.strong_convexity;
    p.learning_rate = system.value("learning_rate", 1.0 / p.smoothness);
    p.initial_gap = exp.synth.initial_gap;
    p.validate();

    exp.solver.conv_tol = solver.value("conv_tol", 1e-9);
    exp.solver.max_iters = solver.value("max_iters", 50);
    exp.solver.nonconvex_rounds = solver.value("nonconvex_rounds", 0);
    const std::string mode = solver.value("power_mode", std::string("auto"));
    if (mode == "equal") {
      exp.solver.mode = PowerMode::equal_power;
    } else if (mode == "heterogeneous") {
      exp.solver.mode = PowerMode::heterogeneous;
    } else if (mode == "auto") {
      exp.solver.mode = PowerMode::equal_power;
      for (const auto& dev : exp.fleet)
        if (dev.peak_power != exp.fleet.front().peak_power)
          exp.solver.mode = PowerMode::heterogeneous;
    } else {
      throw validation_error(
          "config: solver.power_mode must be auto, equal, or heterogeneous");
    }
    exp.seed = solver.value("seed", std::uint64_t{1});
  } catch (const json::exception& e) {
    throw validation_error(std::string("config: ") + e.what());
  }
  return exp;
}

inline json plan_to_json(const SchedulePlan& plan) {
  json j;
  j["schedule"] = plan.schedule;
  j["theta"] = plan.theta;
  j["nu"] = plan.nu;
  j["rounds"] = plan.rounds;
  j["local_steps"] = plan.local_steps;
  json scaling = json::object();
  for (const auto& [id, phi] : plan.power_scaling)
    scaling[std::to_string(id)] = phi;
  j["power_scaling"] = std::move(scaling);
  j["predicted_objective"] = plan.predicted_objective;
  // JSON has no infinity; a null epsilon means the channel was noiseless.
  if (std::isfinite(plan.per_round_epsilon))
    j["per_round_epsilon"] = plan.per_round_epsilon;
  else
    j["per_round_epsilon"] = nullptr;
  j["privacy_note"] =
      "per-round upper bound; no cross-round composition claimed";
  j["converged"] = plan.converged;
  j["iterations"] = plan.iterations;
  j["objective_trace"] = plan.objective_trace;
  json cands = json::array();
  for (const auto& c : plan.candidates) {
    json jc;
    jc["rank"] = c.rank;
    jc["theta"] = c.theta;
    jc["schedule"] = c.schedule;
    jc["psi"] = c.psi;
    jc["feasible"] = c.feasible;
    jc["closed_form"] = c.closed_form;
    cands.push_back(std::move(jc));
  }
  j["candidates"] = std::move(cands);
  return j;
}

inline SchedulePlan plan_from_json(const json& j) {
  SchedulePlan plan;
  try {
    plan.schedule = j.at("schedule").get<std::vector<int>>();
    plan.theta = j.at("theta").get<double>();
    plan.nu = j.at("nu").get<double>();
    plan.rounds = j.at("rounds").get<int>();
    plan.local_steps = j.at("local_steps").get<int>();
    for (const auto& [key, value] : j.at("power_scaling").items())
      plan.power_scaling[std::stoi(key)] = value.get<double>();
    plan.predicted_objective = j.at("predicted_objective").get<double>();
    if (j.contains("per_round_epsilon") && !j.at("per_round_epsilon").is_null())
      plan.per_round_epsilon = j.at("per_round_epsilon").get<double>();
    plan.converged = j.value("converged", true);
    plan.iterations = j.value("iterations", 1);
    plan.objective_trace =
        j.value("objective_trace", std::vector<double>{});
    if (j.contains("candidates")) {
      for (const auto& jc : j.at("candidates")) {
        CandidatePair c;
        c.rank = jc.at("rank").get<int>();
        c.theta = jc.at("theta").get<double>();
        c.schedule = jc.at("schedule").get<std::vector<int>>();
        c.psi = jc.at("psi").get<double>();
        c.feasible = jc.value("feasible", true);
        c.closed_form = jc.value("closed_form", true);
        plan.candidates.push_back(std::move(c));
      }
    }
  } catch (const json::exception& e) {
    throw validation_error(std::string("plan: ") + e.what());
  } catch (const std::exception& e) {
    throw validation_error(std::string("plan: ") + e.what());
  }
  return plan;
}

inline json audit_to_json(const PlanAudit& audit) {
  json j;
  j["passed"] = audit.all_passed();
  json checks = json::array();
  for (const auto& c : audit.checks) {
    json jc;
    jc["name"] = c.name;
    jc["passed"] = c.passed;
    jc["detail"] = c.detail;
    checks.push_back(std::move(jc));
  }
  j["checks"] = std::move(checks);
  return j;
}

inline json bound_report_to_json(const BoundReport& report) {
  json j;
  j["kind"] = bound_kind_name(report.kind);
  j["value"] = report.value;
  j["rounds"] = report.rounds;
  j["schedule_size"] = report.schedule_size;
  j["local_steps"] = report.local_steps;
  j["theta"] = report.theta;
  json p;
  p["n_devices"] = report.params.n_devices;
  p["model_dim"] = report.params.model_dim;
  p["noise_std"] = report.params.noise_std;
  p["epsilon"] = report.params.epsilon;
  p["delta"] = report.params.delta;
  p["sum_power"] = report.params.sum_power;
  p["total_rounds"] = report.params.total_rounds;
  p["grad_bound"] = report.params.grad_bound;
  p["smoothness"] = report.params.smoothness;
  p["strong_convexity"] = report.params.strong_convexity;
  p["learning_rate"] = report.params.learning_rate;
  p["initial_gap"] = report.params.initial_gap;
  j["inputs"] = std::move(p);
  return j;
}

namespace detail {
inline std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}
}  // namespace detail

// One row per communication round; the gap column is empty when the model's
// optimum is unknown.
inline std::string metrics_to_csv(std::span<const RoundMetrics> rounds) {
  std::string out = "round,loss,gap,grad_norm_sq,clips,power_watts,epsilon\n";
  for (const auto& r : rounds) {
    out += std::to_string(r.round_index);
    out += ',';
    out += detail::fmt12(r.global_loss);
    out += ',';
    if (r.optimality_gap) out += detail::fmt12(*r.optimality_gap);
    out += ',';
    out += detail::fmt12(r.grad_norm_sq);
    out += ',';
    out += std::to_string(r.clip_activations);
    out += ',';
    out += detail::fmt12(r.power_spent);
    out += ',';
    out += detail::fmt12(r.epsilon_this_round);
    out += '\n';
  }
  return out;
}

inline json metrics_to_json(std::span<const RoundMetrics> rounds) {
  json arr = json::array();
  for (const auto& r : rounds) {
    json j;
    j["round"] = r.round_index;
    j["loss"] = r.global_loss;
    if (r.optimality_gap) j["gap"] = *r.optimality_gap;
    j["grad_norm_sq"] = r.grad_norm_sq;
    j["clips"] = r.clip_activations;
    j["power_watts"] = r.power_spent;
    j["epsilon"] = r.epsilon_this_round;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot write file: " + path.string());
  out << content;
}

}  // namespace otafl
