#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prosched/distribution.hpp"

namespace prosched {

struct QuantilePoint {
  double level;     // probability in (0,1)
  double value_kw;  // forecast prosumption at that level
};

/// Per-step quantile forecast of prosumption over the scheduling horizon.
struct QuantileForecast {
  double step_hours{1.0};
  int start_hour{6};
  std::vector<std::vector<QuantilePoint>> steps;  // one block per time step

  std::size_t horizon() const { return steps.size(); }

  /// Throws when levels are not strictly increasing in (0,1) or the horizon
  /// is empty. `require_monotone_values` additionally rejects quantile
  /// crossings (valid only after smoothing).
  void validate(bool require_monotone_values = false) const;
};

/// Reads the CSV layout `step,level,value_kw` (steps 0-indexed, any row
/// order). Throws std::runtime_error naming the offending line on malformed
/// rows, out-of-range levels, duplicate levels or missing steps.
QuantileForecast parse_quantile_file(const std::filesystem::path& path);

void write_quantile_file(const std::filesystem::path& path, const QuantileForecast& forecast);

/// Monotone rearrangement (sort values within each step) followed by a
/// centered 5-point moving average across levels with symmetric window
/// shrinkage at the endpoints. Output values are non-decreasing in level.
QuantileForecast smooth_quantiles(const QuantileForecast& raw);

struct FitResult {
  DoubleLogisticCdf cdf;
  double fit_rms{0.0};
  bool degraded{false};  // iteration cap hit before reaching gradient tolerance
  int iterations{0};
};

/// Least-squares fit of a double-logistic CDF to monotone (level, value)
/// pairs: damped Gauss-Newton with a logit transform for the masses, a log
/// transform for the inverse scales (clamped to [1e-3, 50] 1/kW) and three
/// deterministic multi-starts built from the empirical median/IQR.
/// Needs at least six pairs; throws on degenerate (constant) value curves.
FitResult fit_double_logistic(std::span<const double> levels, std::span<const double> values);

/// Smooths and fits every step. `min_spread_kw > 0` floors the component
/// scales afterwards (widens overly tight night-time distributions).
std::vector<FitResult> fit_forecast(const QuantileForecast& raw, double min_spread_kw = 0.0);

/// Expected prosumption plus per-step centered deviation CDFs.
struct ProsumptionModel {
  double step_hours{1.0};
  int start_hour{6};
  std::vector<double> expected_kw;                   // fitted means
  std::vector<DoubleLogisticCdf> deviation_cdfs;     // shifted to mean zero
  std::vector<double> fit_rms;

  std::size_t horizon() const { return expected_kw.size(); }
};

/// Centers each fitted CDF at its mean: expected_kw(k) = fitted mean,
/// deviation CDF = fitted CDF shifted by -mean.
ProsumptionModel center(std::span<const FitResult> fits, double step_hours = 1.0,
                        int start_hour = 6);

enum class SyntheticProfile { pv_dominant, flat, asymmetric_morning };

SyntheticProfile profile_from_name(std::string_view name);  // throws on unknown name
std::string profile_name(SyntheticProfile profile);

/// Deterministic synthetic quantile forecast (24 hourly steps from 06:00 by
/// default). pv_dominant: negative expected prosumption over steps 4-10;
/// flat: one shared curve; asymmetric_morning: right-heavy first step.
QuantileForecast synth_forecast(std::uint64_t seed, SyntheticProfile profile,
                                std::size_t horizon = 24);

/// Fitted-model JSON: array of records {step, w1..w6, fit_rms}.
void write_fit_json(const std::filesystem::path& path, std::span<const FitResult> fits);
std::vector<FitResult> read_fit_json(const std::filesystem::path& path);

}  // namespace prosched
