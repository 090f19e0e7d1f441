#include "prosched/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace prosched {

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) {
    return "";
  }
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': invalid number '" + value + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': invalid integer '" + value + "'");
  }
}

std::vector<double> to_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(to_double(key, trim_copy(item)));
  }
  if (out.empty()) {
    throw std::runtime_error("config key '" + key + "': empty list");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") {
    return true;
  }
  if (value == "false" || value == "0" || value == "no") {
    return false;
  }
  throw std::runtime_error("config key '" + key + "': expected a boolean, got '" + value + "'");
}

std::string format_g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

CostWeights ScenarioConfig::weights(std::size_t horizon_steps) const {
  if (case_name == "case1") {
    return CostWeights::case1(horizon_steps);
  }
  if (case_name == "case2") {
    return CostWeights::case2(horizon_steps);
  }
  if (case_name == "case3") {
    return CostWeights::case3(horizon_steps);
  }
  if (case_name == "custom") {
    CostWeights w;
    w.c1 = cost_c1;
    w.c2 = cost_c2;
    const auto expand = [&](const std::vector<double>& src, const char* key) {
      if (src.size() == 1) {
        return std::vector<double>(horizon_steps, src[0]);
      }
      if (src.size() != horizon_steps) {
        throw std::runtime_error(std::string("config key '") + key +
                                 "': need 1 or horizon entries");
      }
      return src;
    };
    w.c3 = expand(cost_c3.empty() ? std::vector<double>{0.0} : cost_c3, "cost_c3");
    w.c4 = expand(cost_c4.empty() ? std::vector<double>{0.0} : cost_c4, "cost_c4");
    return w;
  }
  throw std::runtime_error("config key 'case': unknown preset '" + case_name + "'");
}

std::string ScenarioConfig::canonical_text() const {
  std::map<std::string, std::string> kv;
  kv["forecast_source"] = synthetic ? "synthetic" : "file";
  kv["forecast_profile"] = profile_name(profile);
  kv["forecast_seed"] = std::to_string(forecast_seed);
  kv["forecast_path"] = forecast_path.string();
  kv["horizon"] = std::to_string(horizon);
  kv["start_hour"] = std::to_string(start_hour);
  kv["step_hours"] = format_g(step_hours);
  kv["min_spread_kw"] = format_g(min_spread_kw);
  kv["battery_e_min"] = format_g(battery.e_min);
  kv["battery_e_max"] = format_g(battery.e_max);
  kv["battery_p_min"] = format_g(battery.p_min);
  kv["battery_p_max"] = format_g(battery.p_max);
  kv["battery_mu"] = format_g(battery.mu);
  kv["battery_e0"] = format_g(battery.e0);
  kv["case"] = case_name;
  kv["cost_c1"] = format_g(cost_c1);
  kv["cost_c2"] = format_g(cost_c2);
  const auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      s += (i ? "," : "") + format_g(v[i]);
    }
    return s;
  };
  kv["cost_c3"] = join(cost_c3);
  kv["cost_c4"] = join(cost_c4);
  kv["pairing"] = pairing == CostPairing::matched ? "matched" : "crossed";
  kv["solver_max_outer"] = std::to_string(solver.max_outer);
  kv["solver_max_inner"] = std::to_string(solver.max_inner);
  kv["solver_grad_tol"] = format_g(solver.grad_tol);
  kv["solver_constraint_tol"] = format_g(solver.constraint_tol);
  kv["solver_penalty_init"] = format_g(solver.penalty_init);
  kv["solver_penalty_growth"] = format_g(solver.penalty_growth);
  kv["solver_restarts"] = std::to_string(solver.restarts);
  kv["solver_seed"] = std::to_string(solver.seed);
  kv["quad_nodes"] = std::to_string(quad.node_count);
  kv["quad_tail_cutoff"] = format_g(quad.tail_cutoff_prob);
  kv["mc_samples"] = std::to_string(mc.sample_count);
  kv["mc_seed"] = std::to_string(mc.seed);
  kv["mc_antithetic"] = mc.antithetic ? "true" : "false";
  std::string text;
  for (const auto& [k, v] : kv) {
    text += k + "=" + v + "\n";
  }
  return text;
}

std::string ScenarioConfig::hash() const {
  // FNV-1a 64-bit over the canonical serialization.
  const std::string text = canonical_text();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ScenarioConfig parse_scenario_text(const std::string& text) {
  ScenarioConfig cfg;
  std::istringstream in(text);
  std::string line;
  bool saw_source = false;
  bool saw_path = false;
  while (std::getline(in, line)) {
    const std::size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) {
      line = line.substr(0, hash_pos);
    }
    line = trim_copy(line);
    if (line.empty()) {
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line without '=': '" + line + "'");
    }
    const std::string key = trim_copy(line.substr(0, eq));
    const std::string value = trim_copy(line.substr(eq + 1));

    if (key == "forecast_source") {
      if (value == "synthetic") {
        cfg.synthetic = true;
      } else if (value == "file") {
        cfg.synthetic = false;
      } else {
        throw std::runtime_error("config key 'forecast_source': expected synthetic|file");
      }
      saw_source = true;
    } else if (key == "forecast_profile") {
      cfg.profile = profile_from_name(value);
    } else if (key == "forecast_seed") {
      cfg.forecast_seed = to_u64(key, value);
    } else if (key == "forecast_path") {
      cfg.forecast_path = value;
      saw_path = !value.empty();
    } else if (key == "horizon") {
      cfg.horizon = static_cast<std::size_t>(to_u64(key, value));
    } else if (key == "start_hour") {
      cfg.start_hour = static_cast<int>(to_u64(key, value));
    } else if (key == "step_hours") {
      cfg.step_hours = to_double(key, value);
    } else if (key == "min_spread_kw") {
      cfg.min_spread_kw = to_double(key, value);
    } else if (key == "battery_e_min") {
      cfg.battery.e_min = to_double(key, value);
    } else if (key == "battery_e_max") {
      cfg.battery.e_max = to_double(key, value);
    } else if (key == "battery_p_min") {
      cfg.battery.p_min = to_double(key, value);
    } else if (key == "battery_p_max") {
      cfg.battery.p_max = to_double(key, value);
    } else if (key == "battery_mu") {
      cfg.battery.mu = to_double(key, value);
    } else if (key == "battery_e0") {
      cfg.battery.e0 = to_double(key, value);
    } else if (key == "case") {
      cfg.case_name = value;
    } else if (key == "cost_c1") {
      cfg.cost_c1 = to_double(key, value);
    } else if (key == "cost_c2") {
      cfg.cost_c2 = to_double(key, value);
    } else if (key == "cost_c3") {
      cfg.cost_c3 = to_double_list(key, value);
    } else if (key == "cost_c4") {
      cfg.cost_c4 = to_double_list(key, value);
    } else if (key == "pairing") {
      if (value == "matched") {
        cfg.pairing = CostPairing::matched;
      } else if (value == "crossed") {
        cfg.pairing = CostPairing::crossed;
      } else {
        throw std::runtime_error("config key 'pairing': expected matched|crossed");
      }
    } else if (key == "solver_max_outer") {
      cfg.solver.max_outer = static_cast<int>(to_u64(key, value));
    } else if (key == "solver_max_inner") {
      cfg.solver.max_inner = static_cast<int>(to_u64(key, value));
    } else if (key == "solver_grad_tol") {
      cfg.solver.grad_tol = to_double(key, value);
    } else if (key == "solver_constraint_tol") {
      cfg.solver.constraint_tol = to_double(key, value);
    } else if (key == "solver_penalty_init") {
      cfg.solver.penalty_init = to_double(key, value);
    } else if (key == "solver_penalty_growth") {
      cfg.solver.penalty_growth = to_double(key, value);
    } else if (key == "solver_restarts") {
      cfg.solver.restarts = static_cast<int>(to_u64(key, value));
    } else if (key == "solver_seed") {
      cfg.solver.seed = to_u64(key, value);
    } else if (key == "quad_nodes") {
      cfg.quad.node_count = static_cast<int>(to_u64(key, value));
    } else if (key == "quad_tail_cutoff") {
      cfg.quad.tail_cutoff_prob = to_double(key, value);
    } else if (key == "mc_samples") {
      cfg.mc.sample_count = static_cast<std::size_t>(to_u64(key, value));
    } else if (key == "mc_seed") {
      cfg.mc.seed = to_u64(key, value);
    } else if (key == "mc_antithetic") {
      cfg.mc.antithetic = to_bool(key, value);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else {
      throw std::runtime_error("unknown config key '" + key + "'");
    }
  }
  if (!saw_source) {
    throw std::runtime_error("config key 'forecast_source' is required");
  }
  if (!cfg.synthetic && !saw_path) {
    throw std::runtime_error("config key 'forecast_path' is required when forecast_source=file");
  }
  cfg.battery.step_hours = cfg.step_hours;
  cfg.quad.validate();
  cfg.mc.validate();
  return cfg;
}

ScenarioConfig parse_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_text(buffer.str());
}

RunArtifacts run_scenario(const ScenarioConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(config.output_dir);

  QuantileForecast forecast;
  if (config.synthetic) {
    forecast = synth_forecast(config.forecast_seed, config.profile, config.horizon);
  } else {
    forecast = parse_quantile_file(config.forecast_path);
  }
  forecast.step_hours = config.step_hours;
  forecast.start_hour = config.start_hour;

  const std::vector<FitResult> fits = fit_forecast(forecast, config.min_spread_kw);
  const ProsumptionModel model = center(fits, config.step_hours, config.start_hour);

  RunArtifacts artifacts;
  artifacts.fit_json = config.output_dir / "fit.json";
  write_fit_json(artifacts.fit_json, fits);

  const CostWeights weights = config.weights(model.horizon());
  const Problem problem = build_problem(model, config.battery, weights, config.quad,
                                        config.pairing);
  const ScheduleSolution solution = solve(problem, config.solver);
  artifacts.converged = solution.converged;
  artifacts.objective = solution.objective;

  artifacts.solution_json = config.output_dir / "solution.json";
  write_solution_json(artifacts.solution_json, solution, config.hash(), config.solver.seed,
                      config.pairing);
  artifacts.plot_csv = config.output_dir / "plot.csv";
  write_plot_csv(artifacts.plot_csv, solution);

  const RolloutStats stats = run_oracle(model, solution, config.battery, config.mc);
  const ComparisonReport report = compare(solution, stats);
  artifacts.oracle_pass = report.pass;
  artifacts.comparison_json = config.output_dir / "comparison.json";
  write_comparison_json(artifacts.comparison_json, report, config.mc);

  const auto t1 = std::chrono::steady_clock::now();
  artifacts.wall_time_s = std::chrono::duration<double>(t1 - t0).count();

  artifacts.summary_txt = config.output_dir / "summary.txt";
  {
    std::ofstream out(artifacts.summary_txt);
    char buf[256];
    out << "scenario " << config.case_name << " (" << config.hash() << ")\n";
    out << "horizon " << model.horizon() << " steps of " << config.step_hours
        << " h starting at " << config.start_hour << ":00\n";
    std::snprintf(buf, sizeof(buf), "objective %.6f, converged %s\n", solution.objective,
                  solution.converged ? "yes" : "no");
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "kkt: stationarity %.3g, max violation %.3g, complementarity %.3g\n",
                  solution.kkt.stationarity, solution.kkt.max_violation,
                  solution.kkt.max_complementarity);
    out << buf;
    std::snprintf(buf, sizeof(buf), "oracle: %s (%zu of %zu checks failed, N=%zu)\n",
                  report.pass ? "pass" : "FAIL", report.failed, report.rows.size(),
                  config.mc.sample_count);
    out << buf;
    std::snprintf(buf, sizeof(buf), "exact-loss upper-envelope excursions: %zu (max %.4g kWh)\n",
                  stats.exact_upper_excursions, stats.max_exact_upper_excursion);
    out << buf;
    std::snprintf(buf, sizeof(buf), "wall time %.2f s\n", artifacts.wall_time_s);
    out << buf;
  }
  return artifacts;
}

CaseComparison compare_cases(const std::vector<std::filesystem::path>& run_dirs) {
  if (run_dirs.empty()) {
    throw std::runtime_error("compare_cases: need at least one run directory");
  }
  CaseComparison cmp;
  std::vector<ScheduleSolution> solutions;
  for (const auto& dir : run_dirs) {
    solutions.push_back(read_solution_json(dir / "solution.json"));
    cmp.run_names.push_back(dir.filename().string());
  }
  const std::size_t K = solutions.front().steps.size();
  for (const auto& sol : solutions) {
    if (sol.steps.size() != K) {
      throw std::runtime_error("compare_cases: mismatched horizons");
    }
    double zero_atom = 0.0;
    for (const auto& s : sol.steps) {
      zero_atom += std::max(0.0, 1.0 - s.p1 - s.p2);
    }
    cmp.total_zero_atom.push_back(zero_atom);
    double window = 0.0;
    int count = 0;
    for (std::size_t k : {std::size_t{6}, std::size_t{7}}) {
      if (k < K) {
        window += sol.steps[k].p1;
        ++count;
      }
    }
    cmp.window_downward_prob.push_back(count ? window / count : 0.0);
  }
  cmp.max_pg_diff.assign(solutions.size(), std::vector<double>(solutions.size(), 0.0));
  for (std::size_t a = 0; a < solutions.size(); ++a) {
    for (std::size_t b = 0; b < solutions.size(); ++b) {
      double worst = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        worst = std::max(worst,
                         std::abs(solutions[a].steps[k].p_g - solutions[b].steps[k].p_g));
      }
      cmp.max_pg_diff[a][b] = worst;
    }
  }
  return cmp;
}

void write_case_comparison_json(const std::filesystem::path& path, const CaseComparison& cmp) {
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < cmp.run_names.size(); ++i) {
    runs.push_back({{"name", cmp.run_names[i]},
                    {"total_zero_atom", cmp.total_zero_atom[i]},
                    {"window_downward_prob", cmp.window_downward_prob[i]}});
  }
  const nlohmann::json doc = {{"runs", runs}, {"max_pg_diff", cmp.max_pg_diff}};
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write comparison: " + path.string());
  }
  out << doc.dump(2) << "\n";
}

std::string format_case_comparison(const CaseComparison& cmp) {
  std::ostringstream out;
  char buf[160];
  out << "run                         sum(zero-atom)  window p1 (steps 6-7)\n";
  for (std::size_t i = 0; i < cmp.run_names.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%-26s  %14.4f  %20.4f\n", cmp.run_names[i].c_str(),
                  cmp.total_zero_atom[i], cmp.window_downward_prob[i]);
    out << buf;
  }
  out << "max per-step |p_G difference|:\n";
  for (std::size_t a = 0; a < cmp.run_names.size(); ++a) {
    for (std::size_t b = 0; b < cmp.run_names.size(); ++b) {
      std::snprintf(buf, sizeof(buf), " %10.6f", cmp.max_pg_diff[a][b]);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace prosched
