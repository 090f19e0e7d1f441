#include "prosched/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prosched {

namespace {

constexpr double kExpClamp = 700.0;  // exp(709) is the double overflow edge

double sigmoid(double u) {
  if (u >= kExpClamp) {
    return 1.0;
  }
  if (u <= -kExpClamp) {
    return 0.0;
  }
  if (u >= 0.0) {
    return 1.0 / (1.0 + std::exp(-u));
  }
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double sigmoid_derivative(double u) {
  const double s = sigmoid(u);
  return s * (1.0 - s);
}

}  // namespace

void DoubleLogisticCdf::validate() const {
  if (!(mass1 >= 0.0) || !(mass2 >= 0.0)) {
    throw std::invalid_argument("DoubleLogisticCdf: component masses must be non-negative");
  }
  if (std::abs(mass1 + mass2 - 1.0) > 1e-9) {
    throw std::invalid_argument("DoubleLogisticCdf: component masses must sum to one");
  }
  if (!(inv_scale1 > 0.0) || !(inv_scale2 > 0.0)) {
    throw std::invalid_argument("DoubleLogisticCdf: inverse scales must be positive");
  }
  if (!std::isfinite(loc1) || !std::isfinite(loc2)) {
    throw std::invalid_argument("DoubleLogisticCdf: locations must be finite");
  }
}

double cdf_eval(const DoubleLogisticCdf& f, double z) {
  const double v = f.mass1 * sigmoid(f.inv_scale1 * (z - f.loc1)) +
                   f.mass2 * sigmoid(f.inv_scale2 * (z - f.loc2));
  return std::clamp(v, 0.0, 1.0);
}

double pdf_eval(const DoubleLogisticCdf& f, double z) {
  return f.mass1 * f.inv_scale1 * sigmoid_derivative(f.inv_scale1 * (z - f.loc1)) +
         f.mass2 * f.inv_scale2 * sigmoid_derivative(f.inv_scale2 * (z - f.loc2));
}

double quantile(const DoubleLogisticCdf& f, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("quantile: q must lie in (0,1)");
  }
  // Component quantiles bracket the mixture quantile.
  const double logit = std::log(q / (1.0 - q));
  const double c1 = f.loc1 + logit / f.inv_scale1;
  const double c2 = f.loc2 + logit / f.inv_scale2;
  double lo = std::min(c1, c2);
  double hi = std::max(c1, c2);
  if (lo == hi) {
    return lo;
  }

  double z = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double err = cdf_eval(f, z) - q;
    if (std::abs(err) <= 1e-14) {
      break;
    }
    if (err > 0.0) {
      hi = z;
    } else {
      lo = z;
    }
    const double dens = pdf_eval(f, z);
    double step_to = (dens > 1e-300) ? z - err / dens : lo - 1.0;
    if (!(step_to > lo && step_to < hi)) {
      step_to = 0.5 * (lo + hi);  // Newton left the bracket; bisect
    }
    if (step_to == z) {
      break;
    }
    z = step_to;
  }
  return z;
}

}  // namespace prosched
