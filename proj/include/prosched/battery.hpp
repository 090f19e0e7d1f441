#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prosched/mixed_rv.hpp"

namespace prosched {

/// Physical storage parameters. Positive battery power discharges.
struct BatterySpec {
  double e_min{0.0};       // kWh
  double e_max{13.5};      // kWh
  double p_min{-5.0};      // kW
  double p_max{5.0};       // kW
  double mu{0.05};         // loss coefficient
  double e0{6.75};         // initial energy, kWh
  double step_hours{1.0};  // h

  void validate() const;
};

/// e' = e - t*p_B - t*mu*|p_B|.
double nominal_step(double e, double p_b, const BatterySpec& spec);

/// Worst-case energy-deviation band update:
///   dE_min' = dE_min - t*(1+mu)*upper,  dE_max' = dE_max - t*(1-mu)*lower.
std::pair<double, double> envelope_step(double de_min, double de_max, const AllocationBounds& b,
                                        const BatterySpec& spec);

/// Propagates the expected total power p_B + E[dP_{L->B}] through the
/// nominal-loss evolution (losses taken on the expected power, not in
/// expectation).
double expected_state_step(double e_exp, double p_b, double exp_dev, const BatterySpec& spec);

/// Nominal state, deviation envelopes and expected state over a horizon.
/// State arrays have K+1 entries (index 0 = initial state), power K entries.
struct BatteryTrajectory {
  std::vector<double> p_b;         // kW, size K
  std::vector<double> e;           // kWh, size K+1
  std::vector<double> de_min;      // kWh, size K+1, non-increasing, <= 0
  std::vector<double> de_max;      // kWh, size K+1, non-decreasing, >= 0
  std::vector<double> e_expected;  // kWh, size K+1

  std::size_t horizon() const { return p_b.size(); }
};

BatteryTrajectory build_trajectory(std::span<const double> p_b,
                                   std::span<const AllocationBounds> bounds,
                                   std::span<const double> expected_dev, const BatterySpec& spec);

struct ConstraintViolation {
  std::size_t step;
  std::string constraint;
  double magnitude;
};

struct FeasibilityReport {
  std::vector<ConstraintViolation> violations;
  bool feasible() const { return violations.empty(); }
};

/// Checks energy envelopes against [e_min, e_max] at every state index and
/// the power band p_B + [lower, upper] against [p_min, p_max] at every step,
/// with 1e-6 absolute tolerance. Throws on length mismatch.
FeasibilityReport check_feasible(const BatteryTrajectory& traj,
                                 std::span<const AllocationBounds> bounds,
                                 const BatterySpec& spec);

}  // namespace prosched
