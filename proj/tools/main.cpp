#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prosched/scenario.hpp"

namespace {

using prosched::ScenarioConfig;

struct CommonFlags {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::string> case_name;
  std::optional<std::string> pairing;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* opt = cmd->add_option("-c,--config", flags.config_path, "scenario config file");
  if (config_required) {
    opt->required();
  }
  cmd->add_option("-o,--out", flags.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", flags.seed, "forecast + solver seed override");
  cmd->add_option("--samples", flags.samples, "Monte-Carlo sample count override");
  cmd->add_option("--case", flags.case_name, "weight preset: case1|case2|case3");
  cmd->add_option("--pairing", flags.pairing, "deviation cost pairing: matched|crossed");
}

ScenarioConfig load_config(const CommonFlags& flags) {
  ScenarioConfig cfg = prosched::parse_scenario_config(flags.config_path);
  if (flags.out_dir) {
    cfg.output_dir = *flags.out_dir;
  }
  if (flags.seed) {
    cfg.forecast_seed = *flags.seed;
    cfg.solver.seed = *flags.seed;
    cfg.mc.seed = *flags.seed;
  }
  if (flags.samples) {
    cfg.mc.sample_count = *flags.samples;
  }
  if (flags.case_name) {
    cfg.case_name = *flags.case_name;
  }
  if (flags.pairing) {
    if (*flags.pairing == "matched") {
      cfg.pairing = prosched::CostPairing::matched;
    } else if (*flags.pairing == "crossed") {
      cfg.pairing = prosched::CostPairing::crossed;
    } else {
      throw std::runtime_error("--pairing: expected matched|crossed");
    }
  }
  return cfg;
}

int run_fit(const ScenarioConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  prosched::QuantileForecast forecast =
      cfg.synthetic ? prosched::synth_forecast(cfg.forecast_seed, cfg.profile, cfg.horizon)
                    : prosched::parse_quantile_file(cfg.forecast_path);
  const auto fits = prosched::fit_forecast(forecast, cfg.min_spread_kw);
  prosched::write_fit_json(cfg.output_dir / "fit.json", fits);
  std::cout << "fitted " << fits.size() << " steps -> " << (cfg.output_dir / "fit.json").string()
            << "\n";
  for (const auto& fit : fits) {
    if (fit.degraded) {
      std::cout << "warning: degraded fit present\n";
      break;
    }
  }
  return 0;
}

int run_solve(const ScenarioConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  prosched::QuantileForecast forecast =
      cfg.synthetic ? prosched::synth_forecast(cfg.forecast_seed, cfg.profile, cfg.horizon)
                    : prosched::parse_quantile_file(cfg.forecast_path);
  const auto fits = prosched::fit_forecast(forecast, cfg.min_spread_kw);
  prosched::write_fit_json(cfg.output_dir / "fit.json", fits);
  const auto model = prosched::center(fits, cfg.step_hours, cfg.start_hour);
  const auto problem = prosched::build_problem(model, cfg.battery,
                                               cfg.weights(model.horizon()), cfg.quad,
                                               cfg.pairing);
  const auto solution = prosched::solve(problem, cfg.solver);
  prosched::write_solution_json(cfg.output_dir / "solution.json", solution, cfg.hash(),
                                cfg.solver.seed, cfg.pairing);
  prosched::write_plot_csv(cfg.output_dir / "plot.csv", solution);
  std::printf("objective %.6f, converged %s, kkt violation %.3g\n", solution.objective,
              solution.converged ? "yes" : "no", solution.kkt.max_violation);
  return solution.converged ? 0 : 1;
}

int run_validate(const std::string& run_dir_str, const ScenarioConfig& cfg) {
  const std::filesystem::path run_dir(run_dir_str);
  const auto fits = prosched::read_fit_json(run_dir / "fit.json");
  const auto model = prosched::center(fits, cfg.step_hours, cfg.start_hour);
  const auto solution = prosched::read_solution_json(run_dir / "solution.json");
  const auto stats = prosched::run_oracle(model, solution, cfg.battery, cfg.mc);
  const auto report = prosched::compare(solution, stats);
  prosched::write_comparison_json(run_dir / "comparison.json", report, cfg.mc);
  std::printf("oracle %s: %zu of %zu checks failed (N=%zu)\n", report.pass ? "pass" : "FAIL",
              report.failed, report.rows.size(), cfg.mc.sample_count);
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probabilistic day-ahead battery scheduling"};
  app.require_subcommand(1);

  CommonFlags fit_flags, solve_flags, validate_flags, run_flags;
  std::string validate_dir;
  std::vector<std::string> compare_dirs;
  std::string compare_out;

  auto* fit_cmd = app.add_subcommand("fit", "fit per-step CDFs to a quantile forecast");
  add_common(fit_cmd, fit_flags);

  auto* solve_cmd = app.add_subcommand("solve", "fit and solve the scheduling problem");
  add_common(solve_cmd, solve_flags);

  auto* validate_cmd =
      app.add_subcommand("validate", "Monte-Carlo validation of an existing run directory");
  add_common(validate_cmd, validate_flags);
  validate_cmd->add_option("--run", validate_dir, "run directory with fit.json + solution.json")
      ->required();

  auto* run_cmd = app.add_subcommand("run", "full pipeline: fit, solve, validate, summarize");
  add_common(run_cmd, run_flags);

  auto* compare_cmd = app.add_subcommand("compare", "tabulate differences across run directories");
  compare_cmd->add_option("--runs", compare_dirs, "run directories")->required()->expected(-1);
  compare_cmd->add_option("-o,--out", compare_out, "write the cross-case report JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) {
      return run_fit(load_config(fit_flags));
    }
    if (solve_cmd->parsed()) {
      return run_solve(load_config(solve_flags));
    }
    if (validate_cmd->parsed()) {
      return run_validate(validate_dir, load_config(validate_flags));
    }
    if (run_cmd->parsed()) {
      const auto artifacts = prosched::run_scenario(load_config(run_flags));
      std::printf("objective %.6f, converged %s, oracle %s, %.2f s\n", artifacts.objective,
                  artifacts.converged ? "yes" : "no", artifacts.oracle_pass ? "pass" : "FAIL",
                  artifacts.wall_time_s);
      std::printf("artifacts in %s\n", artifacts.solution_json.parent_path().string().c_str());
      return (artifacts.converged && artifacts.oracle_pass) ? 0 : 1;
    }
    if (compare_cmd->parsed()) {
      std::vector<std::filesystem::path> dirs(compare_dirs.begin(), compare_dirs.end());
      const auto cmp = prosched::compare_cases(dirs);
      std::cout << prosched::format_case_comparison(cmp);
      if (!compare_out.empty()) {
        prosched::write_case_comparison_json(compare_out, cmp);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
