// Test-side oracles kept independent of the library's integration and
// optimization paths: adaptive quadrature, closed-form logistic-mixture
// partial moments, finite differences, a penalty/projected-gradient solver
// for the deterministic core problem, and seeded random case generators.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "prosched/distribution.hpp"
#include "prosched/mixed_rv.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature (recursive bisection, Lyness error estimate).
// ---------------------------------------------------------------------------

namespace detail {

template <class G>
double adaptive_step(const G& g, double a, double b, double fa, double fm, double fb,
                     double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = g(lm);
  const double frm = g(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_step(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_step(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <class G>
double adaptive_quad(const G& g, double a, double b, double tol = 1e-12, int depth = 48) {
  if (a == b) {
    return 0.0;
  }
  const double m = 0.5 * (a + b);
  const double fa = g(a);
  const double fm = g(m);
  const double fb = g(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_step(g, a, b, fa, fm, fb, whole, tol, depth);
}

// ---------------------------------------------------------------------------
// Closed-form partial moments of the logistic mixture (softplus
// antiderivatives) -- an algebraic route independent of any quadrature.
// ---------------------------------------------------------------------------

inline double softplus(double x) {
  if (x > 35.0) {
    return x;
  }
  if (x < -35.0) {
    return std::exp(x);
  }
  return std::log1p(std::exp(x));
}

// integral of F over (-inf, q]
inline double cdf_antiderivative(const prosched::DoubleLogisticCdf& f, double q) {
  return f.mass1 / f.inv_scale1 * softplus(f.inv_scale1 * (q - f.loc1)) +
         f.mass2 / f.inv_scale2 * softplus(f.inv_scale2 * (q - f.loc2));
}

// integral of z * pdf(z) over [a, b], exact up to rounding:
//   = b F(b) - a F(a) - integral of F over [a, b].
inline double closed_partial_mean(const prosched::DoubleLogisticCdf& f, double a, double b) {
  return b * prosched::cdf_eval(f, b) - a * prosched::cdf_eval(f, a) -
         (cdf_antiderivative(f, b) - cdf_antiderivative(f, a));
}

// integral of (z - shift) pdf(z) over (-inf, b]  ==  -integral of F over
// (-inf, b] + (b - shift) F(b); with shift = b this is the exact left-tail
// grid expectation.
inline double closed_left_tail(const prosched::DoubleLogisticCdf& f, double bound) {
  return -cdf_antiderivative(f, bound);
}

// integral of (z - shift) pdf(z) over [a, +inf) with shift = a.
inline double closed_right_tail(const prosched::DoubleLogisticCdf& f, double bound) {
  // integral of (1 - F) over [bound, inf) via the mirrored softplus.
  return f.mass1 / f.inv_scale1 * softplus(-f.inv_scale1 * (bound - f.loc1)) +
         f.mass2 / f.inv_scale2 * softplus(-f.inv_scale2 * (bound - f.loc2));
}

// ---------------------------------------------------------------------------
// Central finite differences.
// ---------------------------------------------------------------------------

inline std::vector<double> central_differences(const std::function<double(std::span<const double>)>& f,
                                               std::vector<double> x, double h = 1e-5) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Random case generators.
// ---------------------------------------------------------------------------

inline prosched::DoubleLogisticCdf random_centered_cdf(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mass(0.05, 0.95);
  std::uniform_real_distribution<double> inv(0.5, 5.0);
  std::uniform_real_distribution<double> loc(-3.0, 3.0);
  prosched::DoubleLogisticCdf f;
  f.mass1 = mass(rng);
  f.mass2 = 1.0 - f.mass1;
  f.inv_scale1 = inv(rng);
  f.inv_scale2 = inv(rng);
  f.loc1 = loc(rng);
  f.loc2 = loc(rng);
  return f.shifted(-f.mean());
}

inline prosched::AllocationBounds random_bounds(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lower(-4.0, 0.0);
  std::uniform_real_distribution<double> upper(0.0, 4.0);
  return {lower(rng), upper(rng)};
}

}  // namespace oracles
