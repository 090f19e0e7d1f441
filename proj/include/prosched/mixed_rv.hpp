#pragma once

#include <span>
#include <utility>
#include <vector>

#include "prosched/distribution.hpp"
#include "prosched/quadrature.hpp"

namespace prosched {

/// Per-step deviation band fully absorbed by the battery: lower <= 0 <= upper.
struct AllocationBounds {
  double lower{0.0};  // kW, <= 0
  double upper{0.0};  // kW, >= 0

  void validate() const;
};

struct PointMass {
  double location{0.0};  // kW
  double mass{0.0};
};

/// Battery-side deviation: two atoms at the bounds plus the original density
/// truncated to (lower, upper).
struct MixedBatteryDeviation {
  PointMass atom_low;
  PointMass atom_high;
  DoubleLogisticCdf core;  // density restricted to (bounds.lower, bounds.upper)
  AllocationBounds bounds;

  double core_mass() const;
  double total_mass() const { return atom_low.mass + atom_high.mass + core_mass(); }
};

/// Grid-side deviation: zero-inflated distribution with the original tails
/// shifted onto the origin.
struct MixedGridDeviation {
  double atom_zero_mass{0.0};
  DoubleLogisticCdf base;  // centered prosumption deviation CDF
  AllocationBounds bounds;

  double left_tail_mass() const;   // mass on z < 0
  double right_tail_mass() const;  // mass on z > 0
  double total_mass() const;
};

/// Saturation probabilities (p1, p2): mass of the deviation clamped at the
/// lower / upper bound.
std::pair<double, double> atom_probs(const DoubleLogisticCdf& dev, const AllocationBounds& b);

/// E of the battery-side deviation: p1*lower + integral of z f(z) over the
/// band + p2*upper. The interior integral uses a Simpson panel chain.
double expected_battery_dev(const DoubleLogisticCdf& dev, const AllocationBounds& b,
                            const QuadratureConfig& qc);

/// E of the negative grid-deviation part (<= 0).
double expected_grid_dev_neg(const DoubleLogisticCdf& dev, const AllocationBounds& b,
                             const QuadratureConfig& qc);

/// E of the positive grid-deviation part (>= 0).
double expected_grid_dev_pos(const DoubleLogisticCdf& dev, const AllocationBounds& b,
                             const QuadratureConfig& qc);

MixedBatteryDeviation build_battery_dev(const DoubleLogisticCdf& dev, const AllocationBounds& b);

MixedGridDeviation build_grid_dev(const DoubleLogisticCdf& dev, const AllocationBounds& b);

/// CDF of the mixed grid deviation (right-continuous across the zero atom).
double grid_dev_cdf(const MixedGridDeviation& g, double z);

/// Generalized inverse of grid_dev_cdf; returns 0 for any q inside the
/// probability span of the zero atom.
double grid_dev_quantile(const MixedGridDeviation& g, double q);

/// Integral of (w - shift) * pdf(w) over [a, b] with a quantile-spaced
/// Simpson panel chain. Precomputed panel breakpoints (the CDF's quantiles
/// at fixed levels) may be supplied to avoid recomputing them in hot loops.
double partial_first_moment(const DoubleLogisticCdf& f, double a, double b, double shift,
                            int nodes_per_panel, std::span<const double> breakpoints = {});

/// Quantiles of `f` at the fixed panel levels used by partial_first_moment.
std::vector<double> moment_breakpoints(const DoubleLogisticCdf& f);

}  // namespace prosched
