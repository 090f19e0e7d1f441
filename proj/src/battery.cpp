#include "prosched/battery.hpp"

#include <cmath>
#include <stdexcept>

namespace prosched {

namespace {
constexpr double kFeasTol = 1e-6;
}

void BatterySpec::validate() const {
  if (!(e_min <= e0 && e0 <= e_max)) {
    throw std::invalid_argument("BatterySpec: initial energy outside [e_min, e_max]");
  }
  if (!(p_min < 0.0 && 0.0 < p_max)) {
    throw std::invalid_argument("BatterySpec: need p_min < 0 < p_max");
  }
  if (!(mu >= 0.0 && mu < 1.0)) {
    throw std::invalid_argument("BatterySpec: loss coefficient must lie in [0,1)");
  }
  if (!(step_hours > 0.0)) {
    throw std::invalid_argument("BatterySpec: step duration must be positive");
  }
}

double nominal_step(double e, double p_b, const BatterySpec& spec) {
  const double t = spec.step_hours;
  return e - t * p_b - t * spec.mu * std::abs(p_b);
}

std::pair<double, double> envelope_step(double de_min, double de_max, const AllocationBounds& b,
                                        const BatterySpec& spec) {
  const double t = spec.step_hours;
  const double next_min = de_min - t * (1.0 + spec.mu) * b.upper;
  const double next_max = de_max - t * (1.0 - spec.mu) * b.lower;
  return {next_min, next_max};
}

double expected_state_step(double e_exp, double p_b, double exp_dev, const BatterySpec& spec) {
  return nominal_step(e_exp, p_b + exp_dev, spec);
}

BatteryTrajectory build_trajectory(std::span<const double> p_b,
                                   std::span<const AllocationBounds> bounds,
                                   std::span<const double> expected_dev, const BatterySpec& spec) {
  spec.validate();
  const std::size_t horizon = p_b.size();
  if (bounds.size() != horizon || expected_dev.size() != horizon) {
    throw std::invalid_argument("build_trajectory: input lengths differ");
  }
  BatteryTrajectory traj;
  traj.p_b.assign(p_b.begin(), p_b.end());
  traj.e.assign(horizon + 1, spec.e0);
  traj.de_min.assign(horizon + 1, 0.0);
  traj.de_max.assign(horizon + 1, 0.0);
  traj.e_expected.assign(horizon + 1, spec.e0);
  for (std::size_t k = 0; k < horizon; ++k) {
    traj.e[k + 1] = nominal_step(traj.e[k], p_b[k], spec);
    const auto [mn, mx] = envelope_step(traj.de_min[k], traj.de_max[k], bounds[k], spec);
    traj.de_min[k + 1] = mn;
    traj.de_max[k + 1] = mx;
    traj.e_expected[k + 1] = expected_state_step(traj.e_expected[k], p_b[k], expected_dev[k], spec);
  }
  return traj;
}

FeasibilityReport check_feasible(const BatteryTrajectory& traj,
                                 std::span<const AllocationBounds> bounds,
                                 const BatterySpec& spec) {
  const std::size_t horizon = traj.horizon();
  if (bounds.size() != horizon || traj.e.size() != horizon + 1 ||
      traj.de_min.size() != horizon + 1 || traj.de_max.size() != horizon + 1) {
    throw std::invalid_argument("check_feasible: trajectory and bounds lengths differ");
  }
  FeasibilityReport report;
  for (std::size_t k = 0; k <= horizon; ++k) {
    const double low = traj.e[k] + traj.de_min[k];
    const double high = traj.e[k] + traj.de_max[k];
    if (low < spec.e_min - kFeasTol) {
      report.violations.push_back({k, "energy_lower", spec.e_min - low});
    }
    if (high > spec.e_max + kFeasTol) {
      report.violations.push_back({k, "energy_upper", high - spec.e_max});
    }
  }
  for (std::size_t k = 0; k < horizon; ++k) {
    const double p_low = traj.p_b[k] + bounds[k].lower;
    const double p_high = traj.p_b[k] + bounds[k].upper;
    if (p_low < spec.p_min - kFeasTol) {
      report.violations.push_back({k, "power_lower", spec.p_min - p_low});
    }
    if (p_high > spec.p_max + kFeasTol) {
      report.violations.push_back({k, "power_upper", p_high - spec.p_max});
    }
  }
  return report;
}

}  // namespace prosched
