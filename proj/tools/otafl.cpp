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
// Experiment front-end. Subcommands: schedule, simulate, bounds, verify.
// Exit codes: 0 success, 2 validation, 3 infeasible, 4 verification mismatch,
// 5 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "otafl/io.hpp"

namespace {

namespace fs = std::filesystem;
using otafl::json;

struct SeedChoice {
  std::uint64_t flag_value = 0;
  bool flag_given = false;
};

// Precedence: OTA_FEDAVG_SEED env var, then --seed, then the config value.
std::uint64_t resolve_seed(const SeedChoice& choice, std::uint64_t config_seed) {
  if (const char* env = std::getenv("OTA_FEDAVG_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw otafl::validation_error(
          "OTA_FEDAVG_SEED is set but not a valid unsigned integer");
    }
  }
  if (choice.flag_given) return choice.flag_value;
  return config_seed;
}

otafl::Experiment load_experiment(const std::string& config_path) {
  const fs::path path(config_path);
  return otafl::build_experiment(otafl::load_json_file(path),
                                 path.parent_path());
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    otafl::write_text_file(out_path, text);
  }
}

int run_schedule(const std::string& config_path, const std::string& out_path) {
  otafl::Experiment exp = load_experiment(config_path);
  const otafl::SchedulePlan plan =
      otafl::solve_p1(exp.fleet, exp.params, exp.solver);
  emit(otafl::plan_to_json(plan).dump(2) + "\n", out_path);
  if (!out_path.empty())
    std::cerr << "plan: " << plan.schedule.size() << " device(s), theta "
              << plan.theta << ", " << plan.rounds << " round(s) -> "
              << out_path << "\n";
  if (!plan.converged)
    std::cerr << "warning: alternation stopped at max_iters without meeting "
                 "the tolerance\n";
  return 0;
}

int run_simulate(const std::string& config_path, const std::string& plan_path,
                 const SeedChoice& seed_choice, const std::string& out_path,
                 const std::string& format) {
  otafl::Experiment exp = load_experiment(config_path);
  const otafl::SchedulePlan plan =
      otafl::plan_from_json(otafl::load_json_file(plan_path));
  const otafl::PlanAudit audit =
      otafl::verify_plan(plan, exp.fleet, exp.params);
  if (!audit.all_passed()) {
    std::cerr << otafl::audit_to_json(audit).dump(2) << "\n";
    throw otafl::infeasible_error("plan failed the audit; see report above");
  }
  const std::uint64_t seed = resolve_seed(seed_choice, exp.seed);
  const otafl::SimulationResult result = otafl::run_simulation(
      plan, exp.synth.model, exp.params, exp.fleet, seed);
  if (format == "json") {
    emit(otafl::metrics_to_json(result.rounds).dump(2) + "\n", out_path);
  } else {
    emit(otafl::metrics_to_csv(result.rounds), out_path);
  }
  return 0;
}

int run_bounds(const std::string& config_path, const std::string& plan_path,
               const std::string& out_path) {
  otafl::Experiment exp = load_experiment(config_path);
  const otafl::SchedulePlan plan =
      otafl::plan_from_json(otafl::load_json_file(plan_path));
  const otafl::SystemParams& p = exp.params;
  const int k = static_cast<int>(plan.schedule.size());

  json out;
  if (p.noise_std > 0.0) {
    out["per_round_epsilon"] = otafl::per_round_epsilon(
        p.grad_bound, plan.nu, p.noise_std, p.delta);
    out["alignment_cap"] = otafl::alignment_cap(
        otafl::make_privacy_budget(p.epsilon, p.delta), p.noise_std);
  } else {
    out["per_round_epsilon"] = nullptr;
    out["privacy_note"] = "noiseless channel: privacy not accounted";
  }

  json reports = json::array();
  if (p.strong_convexity > 0.0) {
    otafl::BoundReport convex;
    convex.kind = otafl::BoundKind::convex_gap;
    convex.value = otafl::optimality_gap_bound(plan.rounds, k, plan.theta,
                                               plan.local_steps, p);
    convex.rounds = plan.rounds;
    convex.schedule_size = k;
    convex.local_steps = plan.local_steps;
    convex.theta = plan.theta;
    convex.params = p;
    reports.push_back(otafl::bound_report_to_json(convex));
  } else {
    out["convex_gap_note"] =
        "unavailable: strong_convexity is 0 (non-convex mode)";
  }
  {
    otafl::BoundReport base;
    base.kind = otafl::BoundKind::noiseless_gap;
    base.value = otafl::noiseless_gap_bound(p.total_rounds, p.initial_gap,
                                            p.strong_convexity, p.smoothness);
    base.rounds = p.total_rounds;
    base.schedule_size = p.n_devices;
    base.local_steps = 1;
    base.theta = plan.theta;
    base.params = p;
    reports.push_back(otafl::bound_report_to_json(base));
  }
  {
    otafl::BoundReport avg;
    avg.kind = otafl::BoundKind::nonconvex_avg_grad;
    avg.value = otafl::avg_sq_gradient_bound(plan.rounds, k, plan.theta,
                                             plan.local_steps, p);
    avg.rounds = plan.rounds;
    avg.schedule_size = k;
    avg.local_steps = plan.local_steps;
    avg.theta = plan.theta;
    avg.params = p;
    reports.push_back(otafl::bound_report_to_json(avg));
  }
  out["reports"] = std::move(reports);
  emit(out.dump(2) + "\n", out_path);
  return 0;
}

int run_verify(const std::string& config_path, const std::string& plan_path,
               int instances, const SeedChoice& seed_choice, bool inject_fault,
               const std::string& out_path) {
  otafl::Experiment exp = load_experiment(config_path);
  const std::uint64_t seed = resolve_seed(seed_choice, exp.seed);
  json out;
  bool failed = false;

  if (!plan_path.empty()) {
    const otafl::SchedulePlan plan =
        otafl::plan_from_json(otafl::load_json_file(plan_path));
    const otafl::PlanAudit audit =
        otafl::verify_plan(plan, exp.fleet, exp.params);
    out["audit"] = otafl::audit_to_json(audit);
    failed = failed || !audit.all_passed();
  }

  // Check the config's own scheduling instance against the exhaustive search.
  {
    const double cap =
        exp.params.noise_std > 0.0
            ? otafl::alignment_cap(
                  otafl::make_privacy_budget(exp.params.epsilon, exp.params.delta),
                  exp.params.noise_std)
            : std::numeric_limits<double>::infinity();
    const auto sorted = otafl::sort_devices(exp.fleet);
    const auto sel =
        otafl::solve_p2(sorted, cap, exp.params.sum_power,
                        exp.params.total_rounds, exp.solver.mode, exp.params);
    double solver_psi = otafl::objective_psi(
        static_cast<int>(sel.schedule.size()), sel.theta, exp.params);
    if (inject_fault) solver_psi *= 1.01;
    const auto oracle =
        otafl::brute_force_p2(exp.fleet, cap, exp.params.sum_power,
                              exp.params.total_rounds, exp.params);
    const double rel =
        std::abs(solver_psi - oracle.psi) /
        std::max({1e-300, std::abs(solver_psi), std::abs(oracle.psi)});
    json inst;
    inst["solver_psi"] = solver_psi;
    inst["oracle_psi"] = oracle.psi;
    inst["relative_error"] = rel;
    inst["matched"] = rel <= 1e-9;
    out["config_instance"] = std::move(inst);
    failed = failed || rel > 1e-9;
  }

  if (instances > 0) {
    const otafl::SweepOutcome sweep =
        otafl::oracle_sweep(instances, seed, 1e-9, inject_fault);
    json js;
    js["instances"] = sweep.instances;
    js["mismatches"] = sweep.mismatches;
    js["worst_relative_error"] = sweep.worst_rel_err;
    js["failures"] = sweep.failures;
    out["sweep"] = std::move(js);
    failed = failed || sweep.mismatches > 0;
  }

  out["passed"] = !failed;
  emit(out.dump(2) + "\n", out_path);
  if (failed)
    throw otafl::oracle_mismatch_error("verification failed; see report");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Device scheduling, privacy accounting, convergence bounds, and "
      "training simulation for analog over-the-air federated averaging"};
  app.require_subcommand(1);

  std::string config_path, plan_path, out_path, format = "csv";
  int instances = 100;
  bool inject_fault = false;
  SeedChoice seed_choice;

  auto* schedule = app.add_subcommand(
      "schedule", "Solve for the device set, alignment factor, and rounds");
  schedule->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  schedule->add_option("--out", out_path, "Plan output path (default: stdout)");

  auto* simulate = app.add_subcommand(
      "simulate", "Run the training loop under a solved plan");
  simulate->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  simulate->add_option("--plan", plan_path, "Plan file (JSON)")->required();
  auto* sim_seed = simulate->add_option("--seed", seed_choice.flag_value,
                                        "Channel noise seed");
  simulate->add_option("--out", out_path, "Metrics output path (default: stdout)");
  simulate->add_option("--format", format, "Metrics format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  auto* bounds = app.add_subcommand(
      "bounds", "Evaluate the analytic bounds for a config and plan");
  bounds->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  bounds->add_option("--plan", plan_path, "Plan file (JSON)")->required();
  bounds->add_option("--out", out_path, "Report output path (default: stdout)");

  auto* verify = app.add_subcommand(
      "verify", "Audit a plan and compare the solver against brute force");
  verify->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  verify->add_option("--plan", plan_path, "Optional plan file to audit");
  verify->add_option("--instances", instances,
                     "Randomized solver-vs-oracle instances to run");
  auto* ver_seed = verify->add_option("--seed", seed_choice.flag_value,
                                      "Seed for the randomized instances");
  verify->add_flag("--inject-fault", inject_fault,
                   "Perturb the solver output to exercise mismatch detection");
  verify->add_option("--out", out_path, "Report output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    seed_choice.flag_given =
        (sim_seed && sim_seed->count() > 0) || (ver_seed && ver_seed->count() > 0);
    if (schedule->parsed()) return run_schedule(config_path, out_path);
    if (simulate->parsed())
      return run_simulate(config_path, plan_path, seed_choice, out_path, format);
    if (bounds->parsed()) return run_bounds(config_path, plan_path, out_path);
    if (verify->parsed())
      return run_verify(config_path, plan_path, instances, seed_choice,
                        inject_fault, out_path);
  } catch (const otafl::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const otafl::infeasible_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const otafl::oracle_mismatch_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const otafl::numerical_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
