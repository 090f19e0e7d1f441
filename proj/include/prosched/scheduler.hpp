#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "prosched/battery.hpp"
#include "prosched/forecast.hpp"
#include "prosched/mixed_rv.hpp"
#include "prosched/quadrature.hpp"

namespace prosched {

/// Objective weights: c1/c2 price the squared positive/negative nominal grid
/// power, c3/c4 (per step) price the upward/downward deviation terms.
struct CostWeights {
  double c1{2.0};
  double c2{1.0};
  std::vector<double> c3;  // per step
  std::vector<double> c4;  // per step

  static CostWeights case1(std::size_t horizon);  // (2, 1, 0, 0)
  static CostWeights case2(std::size_t horizon);  // (2, 1, 0.5, 0.5)
  /// (2, 1, 2, c4 = 100 on steps 6-7 else 2): critical midday window when
  /// the schedule starts at 06:00.
  static CostWeights case3(std::size_t horizon);

  void validate(std::size_t horizon) const;
};

/// How deviation probabilities pair with the expected deviation magnitudes
/// in the cost: `matched` multiplies each probability with the expected
/// magnitude of the same direction (all terms non-negative); `crossed` uses
/// the transposed, signed pairing.
enum class CostPairing { matched, crossed };

struct DecisionVector {
  std::vector<double> p_b;      // kW
  std::vector<double> x_lower;  // kW, <= 0
  std::vector<double> x_upper;  // kW, >= 0

  std::size_t horizon() const { return p_b.size(); }
};

struct SolverConfig {
  int max_outer{40};
  int max_inner{600};
  double grad_tol{1e-6};        // projected-gradient infinity norm
  double constraint_tol{1e-6};  // max feasibility violation
  double penalty_init{10.0};
  double penalty_growth{10.0};
  double complementarity_slack{1e-8};
  double abs_smoothing_beta{1e3};  // softplus sharpness for |p_B| gradients
  int smoothed_outer_rounds{2};    // rounds using the smoothed |.| derivative
  int restarts{0};
  std::uint64_t seed{0};
  /// Optional pinned nominal powers (re-optimize the allocation bounds only).
  std::optional<std::vector<double>> pin_nominal;
};

/// Assembled stochastic program over (p_B, x_lower, x_upper).
struct Problem {
  ProsumptionModel model;
  BatterySpec battery;
  CostWeights weights;
  QuadratureConfig quad;
  CostPairing pairing{CostPairing::matched};
  /// True when every c3 and c4 is zero: the allocation bounds do not enter
  /// the objective and are pinned to zero.
  bool bounds_fixed_zero{false};

  // Per-step precomputation (independent of the decisions).
  std::vector<double> tail_lo;                      // quantile at cutoff
  std::vector<double> tail_hi;                      // quantile at 1-cutoff
  std::vector<std::vector<double>> panel_points;    // quantile grid per step

  std::size_t horizon() const { return model.horizon(); }
};

Problem build_problem(const ProsumptionModel& model, const BatterySpec& battery,
                      const CostWeights& weights, const QuadratureConfig& quad,
                      CostPairing pairing = CostPairing::matched);

/// Cost of a decision vector (exact signed splits, Simpson expectations).
double objective_eval(const DecisionVector& v, const Problem& problem);

/// Analytic gradient, flattened as [p_B | x_lower | x_upper]; matches central
/// finite differences of objective_eval.
std::vector<double> objective_grad(const DecisionVector& v, const Problem& problem);

struct KktDiagnostics {
  double stationarity{0.0};       // projected Lagrangian gradient, inf norm
  double max_violation{0.0};      // max positive constraint value
  double max_complementarity{0.0};
  double split_complementarity{0.0};  // max |p+ * p-| over both splits
  std::size_t worst_step{0};
  std::string worst_constraint;
};

struct SolutionStep {
  double p_b, x_lower, x_upper;
  double p_g, p_g_pos, p_g_neg, p_b_pos, p_b_neg;
  double e, de_min, de_max, e_expected;  // state at the start of the step
  double p1, p2;
  double exp_dev_neg, exp_dev_pos;  // E of signed grid-deviation parts
  double q05, q95;                  // grid-deviation quantiles
};

struct ScheduleSolution {
  DecisionVector decisions;
  std::vector<SolutionStep> steps;
  BatteryTrajectory trajectory;  // includes the terminal state
  double objective{0.0};
  bool converged{false};
  int outer_iterations{0};
  long inner_iterations{0};
  KktDiagnostics kkt;
  /// Augmented-objective value at the start/end of each outer round
  /// (monotone non-increasing within a round).
  std::vector<std::pair<double, double>> outer_trace;
  /// Final inequality multipliers: energy lower/upper (k = 1..K), power
  /// lower/upper (k = 0..K-1); kept for KKT recomputation.
  std::vector<double> mult_energy_lo, mult_energy_hi, mult_power_lo, mult_power_hi;
};

/// Augmented-Lagrangian solve: state recursions eliminated by forward
/// substitution, inequality constraints penalized, inner minimization by
/// projected L-BFGS on the box p_B in [p_min, p_max], x_lower <= 0 <= x_upper.
/// Deterministic for a fixed config. Throws on an infeasible battery spec;
/// hitting the iteration cap yields a flagged (converged = false) solution.
ScheduleSolution solve(const Problem& problem, const SolverConfig& config = {});

KktDiagnostics kkt_residuals(const ScheduleSolution& solution, const Problem& problem);

/// Solution JSON (all per-step fields plus run metadata).
void write_solution_json(const std::filesystem::path& path, const ScheduleSolution& solution,
                         const std::string& config_hash, std::uint64_t seed,
                         CostPairing pairing);
ScheduleSolution read_solution_json(const std::filesystem::path& path);

/// Plot-data CSV: step,p_g_nominal,q05,q95,prob_up,prob_down,exp_up,exp_down,
/// e_nominal,e_min_env,e_max_env,e_expected.
void write_plot_csv(const std::filesystem::path& path, const ScheduleSolution& solution);

}  // namespace prosched
