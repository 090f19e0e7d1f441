#include "prosched/mixed_rv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace prosched {

namespace {

// Panel levels for the expectation integrals. Quantile spacing keeps every
// panel within a bounded probability mass, so the chain resolves sharply
// peaked night-time densities and wide day-time ones alike.
constexpr std::array<double, 9> kPanelLevels = {1e-8, 1e-4, 0.01,         0.15,        0.5,
                                                0.85,  0.99, 1.0 - 1e-4,  1.0 - 1e-8};

}  // namespace

void AllocationBounds::validate() const {
  if (!(lower <= 0.0) || !(upper >= 0.0)) {
    throw std::invalid_argument("AllocationBounds: need lower <= 0 <= upper");
  }
}

std::vector<double> moment_breakpoints(const DoubleLogisticCdf& f) {
  std::vector<double> pts;
  pts.reserve(kPanelLevels.size() + 10);
  for (double level : kPanelLevels) {
    pts.push_back(quantile(f, level));
  }
  // Mixture quantiles do not resolve a low-mass component; anchor panels at
  // each component's location as well.
  for (double offset : {-4.0, 0.0, 4.0}) {
    pts.push_back(f.loc1 + offset / f.inv_scale1);
    pts.push_back(f.loc2 + offset / f.inv_scale2);
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

double partial_first_moment(const DoubleLogisticCdf& f, double a, double b, double shift,
                            int nodes_per_panel, std::span<const double> breakpoints) {
  if (a >= b) {
    return 0.0;
  }
  const auto integrand = [&](double w) { return (w - shift) * pdf_eval(f, w); };
  if (!breakpoints.empty()) {
    return panel_simpson(integrand, a, b, nodes_per_panel, breakpoints);
  }
  const std::vector<double> pts = moment_breakpoints(f);
  return panel_simpson(integrand, a, b, nodes_per_panel, pts);
}

std::pair<double, double> atom_probs(const DoubleLogisticCdf& dev, const AllocationBounds& b) {
  b.validate();
  const double p1 = cdf_eval(dev, b.lower);
  const double p2 = 1.0 - cdf_eval(dev, b.upper);
  return {p1, p2};
}

double expected_battery_dev(const DoubleLogisticCdf& dev, const AllocationBounds& b,
                            const QuadratureConfig& qc) {
  qc.validate();
  const auto [p1, p2] = atom_probs(dev, b);
  const double interior = partial_first_moment(dev, b.lower, b.upper, 0.0, qc.node_count);
  return p1 * b.lower + interior + p2 * b.upper;
}

double expected_grid_dev_neg(const DoubleLogisticCdf& dev, const AllocationBounds& b,
                             const QuadratureConfig& qc) {
  qc.validate();
  b.validate();
  // integral of z f(z + lower) over [z_cut, 0] == integral of (w - lower) f(w)
  // over [quantile(cutoff), lower].
  const double w_lo = quantile(dev, qc.tail_cutoff_prob);
  if (b.lower <= w_lo) {
    return 0.0;
  }
  return partial_first_moment(dev, w_lo, b.lower, b.lower, qc.node_count);
}

double expected_grid_dev_pos(const DoubleLogisticCdf& dev, const AllocationBounds& b,
                             const QuadratureConfig& qc) {
  qc.validate();
  b.validate();
  const double w_hi = quantile(dev, 1.0 - qc.tail_cutoff_prob);
  if (b.upper >= w_hi) {
    return 0.0;
  }
  return partial_first_moment(dev, b.upper, w_hi, b.upper, qc.node_count);
}

double MixedBatteryDeviation::core_mass() const {
  return cdf_eval(core, bounds.upper) - cdf_eval(core, bounds.lower);
}

MixedBatteryDeviation build_battery_dev(const DoubleLogisticCdf& dev, const AllocationBounds& b) {
  const auto [p1, p2] = atom_probs(dev, b);
  MixedBatteryDeviation out;
  out.atom_low = {b.lower, p1};
  out.atom_high = {b.upper, p2};
  out.core = dev;
  out.bounds = b;
  return out;
}

double MixedGridDeviation::left_tail_mass() const {
  return cdf_eval(base, bounds.lower);
}

double MixedGridDeviation::right_tail_mass() const {
  return 1.0 - cdf_eval(base, bounds.upper);
}

double MixedGridDeviation::total_mass() const {
  return atom_zero_mass + left_tail_mass() + right_tail_mass();
}

MixedGridDeviation build_grid_dev(const DoubleLogisticCdf& dev, const AllocationBounds& b) {
  const auto [p1, p2] = atom_probs(dev, b);
  MixedGridDeviation out;
  out.atom_zero_mass = std::max(0.0, 1.0 - p1 - p2);
  out.base = dev;
  out.bounds = b;
  return out;
}

double grid_dev_cdf(const MixedGridDeviation& g, double z) {
  // Left branch: dP_G <= z < 0 iff dP_L <= z + lower. Right branch (z >= 0)
  // picks up the zero atom: P(dP_G <= z) = 1 - P(dP_L > z + upper).
  if (z < 0.0) {
    return cdf_eval(g.base, z + g.bounds.lower);
  }
  return cdf_eval(g.base, z + g.bounds.upper);
}

double grid_dev_quantile(const MixedGridDeviation& g, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("grid_dev_quantile: q must lie in (0,1)");
  }
  const double p1 = g.left_tail_mass();
  const double p2 = g.right_tail_mass();
  if (q < p1) {
    return quantile(g.base, q) - g.bounds.lower;
  }
  if (q <= 1.0 - p2) {
    return 0.0;  // inside the zero atom's span [p1, p1 + atom]
  }
  return quantile(g.base, q) - g.bounds.upper;
}

}  // namespace prosched
