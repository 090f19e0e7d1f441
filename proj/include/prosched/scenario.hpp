#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "prosched/montecarlo.hpp"
#include "prosched/scheduler.hpp"

namespace prosched {

/// One scenario: forecast source, battery, weights, solver/quadrature/MC
/// settings and the output directory. Parsed from a flat key=value file.
struct ScenarioConfig {
  // Forecast source (exactly one of synthetic profile or input file).
  bool synthetic{true};
  SyntheticProfile profile{SyntheticProfile::pv_dominant};
  std::uint64_t forecast_seed{1};
  std::filesystem::path forecast_path;
  std::size_t horizon{24};
  int start_hour{6};
  double step_hours{1.0};
  double min_spread_kw{0.0};

  BatterySpec battery;

  std::string case_name{"case2"};  // case1 | case2 | case3 | custom
  double cost_c1{2.0};
  double cost_c2{1.0};
  std::vector<double> cost_c3;  // used when case_name == custom
  std::vector<double> cost_c4;

  CostPairing pairing{CostPairing::matched};
  SolverConfig solver;
  QuadratureConfig quad;
  McConfig mc;

  std::filesystem::path output_dir{"out"};

  CostWeights weights(std::size_t horizon_steps) const;
  /// Canonical serialization (sorted keys) used for hashing.
  std::string canonical_text() const;
  std::string hash() const;  // FNV-1a of canonical_text
};

/// Parses the flat key=value format ('#' comments). Unknown keys and invalid
/// values raise errors naming the key.
ScenarioConfig parse_scenario_config(const std::filesystem::path& path);
ScenarioConfig parse_scenario_text(const std::string& text);

struct RunArtifacts {
  std::filesystem::path fit_json;
  std::filesystem::path solution_json;
  std::filesystem::path plot_csv;
  std::filesystem::path comparison_json;
  std::filesystem::path summary_txt;
  bool converged{false};
  bool oracle_pass{false};
  double objective{0.0};
  double wall_time_s{0.0};
};

/// Full pipeline: forecast -> fit -> solve -> Monte-Carlo validation.
/// Writes fit.json, solution.json, plot.csv, comparison.json, summary.txt
/// into the output directory.
RunArtifacts run_scenario(const ScenarioConfig& config);

struct CaseComparison {
  std::vector<std::string> run_names;
  std::vector<double> total_zero_atom;          // per run: sum over steps of 1-p1-p2
  std::vector<double> window_downward_prob;     // per run: mean p1 over steps 6-7
  std::vector<std::vector<double>> max_pg_diff; // pairwise max per-step |p_G difference|
};

/// Cross-case tabulation from previously written run directories; throws on
/// mismatched horizons.
CaseComparison compare_cases(const std::vector<std::filesystem::path>& run_dirs);

void write_case_comparison_json(const std::filesystem::path& path, const CaseComparison& cmp);
std::string format_case_comparison(const CaseComparison& cmp);

}  // namespace prosched
