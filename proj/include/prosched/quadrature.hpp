#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace prosched {

/// Discretisation settings for the expectation integrals.
struct QuadratureConfig {
  /// Simpson nodes per panel chain; must be even and >= 2.
  int node_count{64};
  /// Integration domains are cut where the shifted CDF is within this mass
  /// of 0/1. Keeps truncation error (cutoff mass x truncation distance)
  /// well below the 1e-5 identity tolerances.
  double tail_cutoff_prob{1e-8};

  void validate() const {
    if (node_count < 2 || node_count % 2 != 0) {
      throw std::invalid_argument("QuadratureConfig: node_count must be even and >= 2");
    }
    if (!(tail_cutoff_prob > 0.0 && tail_cutoff_prob < 1e-2)) {
      throw std::invalid_argument("QuadratureConfig: tail_cutoff_prob must lie in (0, 1e-2)");
    }
  }
};

/// Composite Simpson 1/3 rule with n (even) sub-intervals over [a, b].
/// Exact for polynomials up to degree three; throws on odd n.
template <class G>
double simpson_integrate(G&& g, double a, double b, int n) {
  if (n < 2 || n % 2 != 0) {
    throw std::invalid_argument("simpson_integrate: panel count must be even and >= 2");
  }
  if (a == b) {
    return 0.0;
  }
  const double h = (b - a) / n;
  double odd = 0.0;
  double even = 0.0;
  for (int i = 1; i < n; i += 2) {
    odd += g(a + i * h);
  }
  for (int i = 2; i < n; i += 2) {
    even += g(a + i * h);
  }
  return (h / 3.0) * (g(a) + g(b) + 4.0 * odd + 2.0 * even);
}

/// Simpson 1/3 applied per panel of a chain covering [a, b]. Interior
/// breakpoints (sorted, possibly outside [a,b]; out-of-range ones are
/// dropped) let the chain track the scale structure of the integrand, e.g.
/// quantile-spaced panels over a sharply peaked density.
template <class G>
double panel_simpson(G&& g, double a, double b, int nodes_per_panel,
                     std::span<const double> interior) {
  if (a == b) {
    return 0.0;
  }
  double edges[40];
  int m = 0;
  edges[m++] = a;
  for (double p : interior) {
    if (p > a && p < b && m < 39) {
      edges[m++] = p;
    }
  }
  edges[m++] = b;
  std::sort(edges, edges + m);
  double total = 0.0;
  for (int i = 0; i + 1 < m; ++i) {
    total += simpson_integrate(g, edges[i], edges[i + 1], nodes_per_panel);
  }
  return total;
}

}  // namespace prosched
