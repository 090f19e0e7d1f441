#pragma once

namespace prosched {

/// Prosumption CDF formed by the weighted sum of two logistic components:
///   F(z) = mass1 * sigmoid(inv_scale1 * (z - loc1))
///        + mass2 * sigmoid(inv_scale2 * (z - loc2)).
/// Valid instances have mass1 + mass2 = 1, masses >= 0 and inverse scales
/// > 0, which makes F a proper, strictly increasing distribution function.
struct DoubleLogisticCdf {
  double mass1{0.5};
  double inv_scale1{1.0};  // 1/kW
  double loc1{0.0};        // kW
  double mass2{0.5};
  double inv_scale2{1.0};  // 1/kW
  double loc2{0.0};        // kW

  double mean() const { return mass1 * loc1 + mass2 * loc2; }

  /// Same shape with both locations moved by `offset`.
  DoubleLogisticCdf shifted(double offset) const {
    DoubleLogisticCdf g = *this;
    g.loc1 += offset;
    g.loc2 += offset;
    return g;
  }

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

/// F(z). Exponent arguments are clamped so extreme inputs saturate to 0/1
/// instead of overflowing.
double cdf_eval(const DoubleLogisticCdf& f, double z);

/// Density dF/dz; non-negative, integrates to one.
double pdf_eval(const DoubleLogisticCdf& f, double z);

/// Inverse CDF for q in (0,1), solved by safeguarded Newton bisection to
/// |F(z) - q| <= ~1e-14.
double quantile(const DoubleLogisticCdf& f, double q);

}  // namespace prosched
