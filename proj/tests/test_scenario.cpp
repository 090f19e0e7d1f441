#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "prosched/scenario.hpp"

using namespace prosched;

namespace {

std::string small_config(const std::string& case_name, const std::string& out_dir,
                         const std::string& extra = "") {
  std::ostringstream cfg;
  cfg << "forecast_source = synthetic\n"
      << "forecast_profile = pv_dominant\n"
      << "forecast_seed = 1\n"
      << "case = " << case_name << "\n"
      << "mc_samples = 20000\n"
      << "mc_seed = 9\n"
      << "output_dir = " << out_dir << "\n"
      << extra;
  return cfg.str();
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("presets expand to the published weight tables") {
    const ScenarioConfig cfg = parse_scenario_text(small_config("case3", "x"));
    const CostWeights w = cfg.weights(24);
    CHECK(w.c1 == 2.0);
    CHECK(w.c2 == 1.0);
    for (std::size_t k = 0; k < 24; ++k) {
      CHECK(w.c3[k] == 2.0);
      CHECK(w.c4[k] == ((k == 6 || k == 7) ? 100.0 : 2.0));
    }
    const CostWeights w2 = parse_scenario_text(small_config("case2", "x")).weights(24);
    for (std::size_t k = 0; k < 24; ++k) {
      CHECK(w2.c3[k] == 0.5);
      CHECK(w2.c4[k] == 0.5);
    }
  }
  SUBCASE("errors name the offending key") {
    CHECK_THROWS_WITH_AS(parse_scenario_text("forecast_source = synthetic\nbattery_mu = abc\n"),
                         doctest::Contains("battery_mu"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_scenario_text("forecast_source = synthetic\nnot_a_key = 1\n"),
                         doctest::Contains("not_a_key"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_scenario_text("case = case2\n"),
                         doctest::Contains("forecast_source"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_scenario_text("forecast_source = file\n"),
                         doctest::Contains("forecast_path"), std::runtime_error);
  }
  SUBCASE("custom per-step weight lists") {
    std::string extra = "cost_c3 = 1,2,3\ncost_c4 = 4\n";
    ScenarioConfig cfg = parse_scenario_text(small_config("custom", "x", extra));
    const CostWeights w = cfg.weights(3);
    CHECK(w.c3 == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(w.c4 == std::vector<double>{4.0, 4.0, 4.0});
    CHECK_THROWS_AS(cfg.weights(5), std::runtime_error);
  }
  SUBCASE("config hash is stable and value-sensitive") {
    const ScenarioConfig a = parse_scenario_text(small_config("case2", "x"));
    const ScenarioConfig b = parse_scenario_text(small_config("case2", "x"));
    const ScenarioConfig c = parse_scenario_text(small_config("case3", "x"));
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != c.hash());
  }
}

TEST_CASE("run_scenario writes the full artifact set") {
  const auto dir = temp_dir("prosched_run_case1");
  ScenarioConfig cfg = parse_scenario_text(small_config("case1", dir.string()));
  const RunArtifacts artifacts = run_scenario(cfg);
  CHECK(artifacts.converged);
  CHECK(artifacts.oracle_pass);
  for (const auto& path : {artifacts.fit_json, artifacts.solution_json, artifacts.plot_csv,
                           artifacts.comparison_json, artifacts.summary_txt}) {
    CHECK(std::filesystem::exists(path));
  }

  // Case 1: deterministic battery schedule -> coinciding envelopes.
  const ScheduleSolution sol = read_solution_json(artifacts.solution_json);
  for (const auto& s : sol.steps) {
    CHECK(s.de_min == 0.0);
    CHECK(s.de_max == 0.0);
    CHECK(s.x_lower == 0.0);
    CHECK(s.x_upper == 0.0);
  }

  const std::string csv = slurp(artifacts.plot_csv);
  CHECK(csv.rfind("step,p_g_nominal,q05,q95,prob_up,prob_down,exp_up,exp_down,"
                  "e_nominal,e_min_env,e_max_env,e_expected",
                  0) == 0);
}

TEST_CASE("case 2 produces a non-trivial zero atom somewhere") {
  const auto dir = temp_dir("prosched_run_case2");
  ScenarioConfig cfg = parse_scenario_text(small_config("case2", dir.string()));
  const RunArtifacts artifacts = run_scenario(cfg);
  CHECK(artifacts.converged);
  CHECK(artifacts.oracle_pass);
  const ScheduleSolution sol = read_solution_json(artifacts.solution_json);
  double best = 0.0;
  for (const auto& s : sol.steps) {
    best = std::max(best, 1.0 - s.p1 - s.p2);
  }
  CHECK(best > 0.0);
}

TEST_CASE("pipeline determinism: identical bytes across reruns") {
  const auto dir_a = temp_dir("prosched_det_a");
  const auto dir_b = temp_dir("prosched_det_b");
  ScenarioConfig cfg_a =
      parse_scenario_text(small_config("case2", dir_a.string(), "mc_samples = 5000\n"));
  ScenarioConfig cfg_b =
      parse_scenario_text(small_config("case2", dir_b.string(), "mc_samples = 5000\n"));
  const RunArtifacts a = run_scenario(cfg_a);
  const RunArtifacts b = run_scenario(cfg_b);
  CHECK(slurp(a.fit_json) == slurp(b.fit_json));
  CHECK(slurp(a.solution_json) == slurp(b.solution_json));
  CHECK(slurp(a.plot_csv) == slurp(b.plot_csv));
  CHECK(slurp(a.comparison_json) == slurp(b.comparison_json));
}

TEST_CASE("compare_cases tabulates runs and rejects mismatched horizons") {
  const auto dir1 = temp_dir("prosched_cmp_1");
  const auto dir2 = temp_dir("prosched_cmp_2");
  ScenarioConfig c1 =
      parse_scenario_text(small_config("case1", dir1.string(), "mc_samples = 2000\n"));
  ScenarioConfig c2 =
      parse_scenario_text(small_config("case2", dir2.string(), "mc_samples = 2000\n"));
  run_scenario(c1);
  run_scenario(c2);

  SUBCASE("self-comparison is all zeros") {
    const CaseComparison cmp = compare_cases({dir1, dir1});
    CHECK(cmp.max_pg_diff[0][1] == 0.0);
    CHECK(cmp.total_zero_atom[0] == cmp.total_zero_atom[1]);
  }
  SUBCASE("case1 vs case2 reports a finite nominal difference and more absorption") {
    const CaseComparison cmp = compare_cases({dir1, dir2});
    CHECK(cmp.max_pg_diff[0][1] >= 0.0);
    CHECK(cmp.total_zero_atom[1] > cmp.total_zero_atom[0]);
    const std::string text = format_case_comparison(cmp);
    CHECK(text.find("zero-atom") != std::string::npos);
  }
  SUBCASE("horizon mismatch throws") {
    const auto dir3 = temp_dir("prosched_cmp_3");
    ScenarioConfig c3 = parse_scenario_text(
        small_config("case1", dir3.string(), "horizon = 6\nmc_samples = 1000\n"));
    run_scenario(c3);
    CHECK_THROWS_WITH_AS(compare_cases({dir1, dir3}), doctest::Contains("mismatched"),
                         std::runtime_error);
  }
}
