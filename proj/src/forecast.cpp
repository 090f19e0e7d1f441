#include "prosched/forecast.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "prosched/rng.hpp"

namespace prosched {

namespace {

double parse_double_field(std::string_view field, std::size_t line_no, const char* what) {
  double out = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": bad " +
                             std::string(what) + " '" + std::string(field) + "'");
  }
  return out;
}

long parse_int_field(std::string_view field, std::size_t line_no, const char* what) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": bad " +
                             std::string(what) + " '" + std::string(field) + "'");
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

void QuantileForecast::validate(bool require_monotone_values) const {
  if (steps.empty()) {
    throw std::runtime_error("QuantileForecast: horizon must be >= 1");
  }
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& block = steps[k];
    if (block.empty()) {
      throw std::runtime_error("QuantileForecast: step " + std::to_string(k) + " has no rows");
    }
    for (std::size_t i = 0; i < block.size(); ++i) {
      if (!(block[i].level > 0.0 && block[i].level < 1.0)) {
        throw std::runtime_error("QuantileForecast: level out of (0,1) in step " +
                                 std::to_string(k));
      }
      if (i > 0 && !(block[i].level > block[i - 1].level)) {
        throw std::runtime_error("QuantileForecast: levels not strictly increasing in step " +
                                 std::to_string(k));
      }
      if (require_monotone_values && i > 0 && block[i].value_kw < block[i - 1].value_kw) {
        throw std::runtime_error("QuantileForecast: quantile crossing in step " +
                                 std::to_string(k));
      }
    }
  }
  if (!(step_hours > 0.0)) {
    throw std::runtime_error("QuantileForecast: step_hours must be positive");
  }
}

QuantileForecast parse_quantile_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open quantile file: " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw std::runtime_error("quantile file is empty: " + path.string());
  }
  ++line_no;
  if (trim(line) != "step,level,value_kw") {
    throw std::runtime_error("parse error at line 1: expected header 'step,level,value_kw'");
  }

  std::map<long, std::vector<QuantilePoint>> blocks;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) {
      continue;
    }
    const std::size_t c1 = row.find(',');
    const std::size_t c2 = (c1 == std::string_view::npos) ? std::string_view::npos
                                                          : row.find(',', c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos ||
        row.find(',', c2 + 1) != std::string_view::npos) {
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": expected 3 comma-separated fields");
    }
    const long step = parse_int_field(trim(row.substr(0, c1)), line_no, "step index");
    const double level = parse_double_field(trim(row.substr(c1 + 1, c2 - c1 - 1)), line_no, "level");
    const double value = parse_double_field(trim(row.substr(c2 + 1)), line_no, "value_kw");
    if (step < 0) {
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": negative step index");
    }
    if (!(level > 0.0 && level < 1.0)) {
      throw std::runtime_error("validation error at line " + std::to_string(line_no) +
                               ": level must lie in (0,1)");
    }
    blocks[step].push_back({level, value});
  }
  if (blocks.empty()) {
    throw std::runtime_error("quantile file has no data rows: " + path.string());
  }

  QuantileForecast out;
  long expected = 0;
  for (auto& [step, rows] : blocks) {
    if (step != expected) {
      throw std::runtime_error("validation error: missing step " + std::to_string(expected));
    }
    ++expected;
    std::sort(rows.begin(), rows.end(),
              [](const QuantilePoint& a, const QuantilePoint& b) { return a.level < b.level; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (std::abs(rows[i].level - rows[i - 1].level) < 1e-12) {
        throw std::runtime_error("validation error: duplicate level " +
                                 std::to_string(rows[i].level) + " in step " +
                                 std::to_string(step));
      }
    }
    out.steps.push_back(std::move(rows));
  }
  out.validate(false);
  return out;
}

void write_quantile_file(const std::filesystem::path& path, const QuantileForecast& forecast) {
  std::ofstream outf(path);
  if (!outf) {
    throw std::runtime_error("cannot write quantile file: " + path.string());
  }
  outf << "step,level,value_kw\n";
  char buf[80];
  for (std::size_t k = 0; k < forecast.steps.size(); ++k) {
    for (const QuantilePoint& p : forecast.steps[k]) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", k, p.level, p.value_kw);
      outf << buf;
    }
  }
}

QuantileForecast smooth_quantiles(const QuantileForecast& raw) {
  raw.validate(false);
  QuantileForecast out = raw;
  for (auto& block : out.steps) {
    const std::size_t n = block.size();
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      values[i] = block[i].value_kw;
    }
    // Monotone rearrangement: crossing quantiles are resolved by sorting the
    // values while the level grid stays fixed.
    std::sort(values.begin(), values.end());
    // Centered moving average, radius 2, shrinking symmetrically at the ends
    // (radius min(i, n-1-i, 2)); preserves monotonicity and endpoints.
    std::vector<double> smoothed(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = std::min({i, n - 1 - i, std::size_t{2}});
      double acc = 0.0;
      for (std::size_t j = i - r; j <= i + r; ++j) {
        acc += values[j];
      }
      smoothed[i] = acc / static_cast<double>(2 * r + 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      block[i].value_kw = smoothed[i];
    }
  }
  out.validate(true);
  return out;
}

// ---------------------------------------------------------------------------
// Double-logistic fitting
// ---------------------------------------------------------------------------

namespace {

constexpr double kMinInvScale = 1e-3;  // 1/kW
constexpr double kMaxInvScale = 50.0;
constexpr int kMaxFitIterations = 200;
constexpr double kFitGradTol = 1e-10;

// Free parameters: (logit mass1, log inv_scale1, log inv_scale2, loc1, loc2).
struct FitParams {
  std::array<double, 5> theta;

  DoubleLogisticCdf to_cdf() const {
    DoubleLogisticCdf f;
    const double m = 1.0 / (1.0 + std::exp(-std::clamp(theta[0], -40.0, 40.0)));
    f.mass1 = m;
    f.mass2 = 1.0 - m;
    f.inv_scale1 = std::exp(theta[1]);
    f.inv_scale2 = std::exp(theta[2]);
    f.loc1 = theta[3];
    f.loc2 = theta[4];
    return f;
  }

  void clamp() {
    const double lo = std::log(kMinInvScale);
    const double hi = std::log(kMaxInvScale);
    theta[0] = std::clamp(theta[0], -40.0, 40.0);
    theta[1] = std::clamp(theta[1], lo, hi);
    theta[2] = std::clamp(theta[2], lo, hi);
  }
};

double sum_squared_residuals(const FitParams& p, std::span<const double> levels,
                             std::span<const double> values) {
  const DoubleLogisticCdf f = p.to_cdf();
  double ssr = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double r = cdf_eval(f, values[i]) - levels[i];
    ssr += r * r;
  }
  return ssr;
}

// Residuals r_i = F(v_i) - l_i and the analytic Jacobian wrt theta.
void residuals_jacobian(const FitParams& p, std::span<const double> levels,
                        std::span<const double> values, std::vector<double>& r,
                        std::vector<std::array<double, 5>>& J) {
  const DoubleLogisticCdf f = p.to_cdf();
  const std::size_t n = levels.size();
  r.resize(n);
  J.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = values[i];
    const double u1 = std::clamp(f.inv_scale1 * (v - f.loc1), -700.0, 700.0);
    const double u2 = std::clamp(f.inv_scale2 * (v - f.loc2), -700.0, 700.0);
    const double s1 = 1.0 / (1.0 + std::exp(-u1));
    const double s2 = 1.0 / (1.0 + std::exp(-u2));
    const double d1 = s1 * (1.0 - s1);
    const double d2 = s2 * (1.0 - s2);
    r[i] = f.mass1 * s1 + f.mass2 * s2 - levels[i];
    J[i][0] = (s1 - s2) * f.mass1 * f.mass2;              // via logit(mass1)
    J[i][1] = f.mass1 * d1 * (v - f.loc1) * f.inv_scale1; // via log(inv_scale1)
    J[i][2] = f.mass2 * d2 * (v - f.loc2) * f.inv_scale2;
    J[i][3] = -f.mass1 * d1 * f.inv_scale1;
    J[i][4] = -f.mass2 * d2 * f.inv_scale2;
  }
}

// Solves the 5x5 SPD system (A + damp*diag(A)) x = b in place.
bool solve_damped(std::array<std::array<double, 5>, 5> A, std::array<double, 5> b, double damp,
                  std::array<double, 5>& x) {
  for (int i = 0; i < 5; ++i) {
    A[i][i] += damp * std::max(A[i][i], 1e-12);
  }
  // Cholesky factorisation.
  std::array<std::array<double, 5>, 5> L{};
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A[i][j];
      for (int k = 0; k < j; ++k) {
        s -= L[i][k] * L[j][k];
      }
      if (i == j) {
        if (s <= 0.0) {
          return false;
        }
        L[i][i] = std::sqrt(s);
      } else {
        L[i][j] = s / L[j][j];
      }
    }
  }
  std::array<double, 5> y{};
  for (int i = 0; i < 5; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) {
      s -= L[i][k] * y[k];
    }
    y[i] = s / L[i][i];
  }
  for (int i = 4; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < 5; ++k) {
      s -= L[k][i] * x[k];
    }
    x[i] = s / L[i][i];
  }
  return true;
}

struct LmOutcome {
  FitParams params;
  double ssr;
  bool degraded;
  int iterations;
};

LmOutcome run_levenberg_marquardt(FitParams p, std::span<const double> levels,
                                  std::span<const double> values) {
  p.clamp();
  double ssr = sum_squared_residuals(p, levels, values);
  double damp = 1e-3;
  std::vector<double> r;
  std::vector<std::array<double, 5>> J;
  int it = 0;
  bool reached_tol = false;
  for (; it < kMaxFitIterations; ++it) {
    residuals_jacobian(p, levels, values, r, J);
    std::array<double, 5> g{};
    std::array<std::array<double, 5>, 5> A{};
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (int a = 0; a < 5; ++a) {
        g[a] += J[i][a] * r[i];
        for (int b = a; b < 5; ++b) {
          A[a][b] += J[i][a] * J[i][b];
        }
      }
    }
    for (int a = 0; a < 5; ++a) {
      for (int b = 0; b < a; ++b) {
        A[a][b] = A[b][a];
      }
    }
    double gnorm = 0.0;
    for (double gi : g) {
      gnorm = std::max(gnorm, std::abs(gi));
    }
    if (gnorm <= kFitGradTol) {
      reached_tol = true;
      break;
    }

    bool accepted = false;
    for (int tries = 0; tries < 40; ++tries) {
      std::array<double, 5> step{};
      std::array<double, 5> rhs;
      for (int a = 0; a < 5; ++a) {
        rhs[a] = -g[a];
      }
      if (solve_damped(A, rhs, damp, step)) {
        FitParams trial = p;
        for (int a = 0; a < 5; ++a) {
          trial.theta[a] += step[a];
        }
        trial.clamp();
        const double trial_ssr = sum_squared_residuals(trial, levels, values);
        if (trial_ssr <= ssr) {
          const double improvement = ssr - trial_ssr;
          p = trial;
          ssr = trial_ssr;
          damp = std::max(damp / 3.0, 1e-12);
          accepted = true;
          if (improvement <= 1e-18 * (1.0 + ssr)) {
            reached_tol = true;
          }
          break;
        }
      }
      damp *= 4.0;
      if (damp > 1e14) {
        break;
      }
    }
    if (!accepted || reached_tol) {
      reached_tol = reached_tol || !accepted;
      break;
    }
  }
  return {p, ssr, !reached_tol && it >= kMaxFitIterations, it};
}

double value_at_level(std::span<const double> levels, std::span<const double> values,
                      double target) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (std::abs(levels[i] - target) < std::abs(levels[best] - target)) {
      best = i;
    }
  }
  return values[best];
}

}  // namespace

FitResult fit_double_logistic(std::span<const double> levels, std::span<const double> values) {
  if (levels.size() != values.size()) {
    throw std::invalid_argument("fit_double_logistic: levels/values size mismatch");
  }
  if (levels.size() < 6) {
    throw std::invalid_argument("fit_double_logistic: need at least 6 quantile points");
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0)) {
      throw std::invalid_argument("fit_double_logistic: levels must lie in (0,1)");
    }
    if (i > 0 && (levels[i] <= levels[i - 1] || values[i] < values[i - 1])) {
      throw std::invalid_argument("fit_double_logistic: inputs must be monotone");
    }
  }
  const double vmin = values.front();
  const double vmax = values.back();
  if (vmax - vmin < 1e-12 * std::max(1.0, std::abs(vmax))) {
    throw std::runtime_error("degenerate quantile curve");
  }

  const double med = value_at_level(levels, values, 0.5);
  const double q25 = value_at_level(levels, values, 0.25);
  const double q75 = value_at_level(levels, values, 0.75);
  const double q90 = value_at_level(levels, values, 0.90);
  const double iqr = std::max(q75 - q25, 1e-3 * std::max(1.0, vmax - vmin));
  const double base_inv = std::clamp(2.0 * std::log(3.0) / iqr, kMinInvScale, kMaxInvScale);

  // Deterministic multi-starts from the empirical median/IQR split.
  std::array<FitParams, 3> starts;
  starts[0].theta = {0.0, std::log(base_inv), std::log(base_inv), med - 0.3 * iqr,
                     med + 0.3 * iqr};
  starts[1].theta = {0.0, std::log(std::min(2.0 * base_inv, kMaxInvScale)),
                     std::log(std::min(2.0 * base_inv, kMaxInvScale)), q25, q75};
  starts[2].theta = {std::log(0.8 / 0.2), std::log(base_inv),
                     std::log(std::clamp(2.0 * std::log(3.0) / std::max(vmax - q90, 0.05 * iqr),
                                         kMinInvScale, kMaxInvScale)),
                     med, q90};

  LmOutcome best{starts[0], std::numeric_limits<double>::infinity(), true, 0};
  for (const FitParams& s : starts) {
    const LmOutcome out = run_levenberg_marquardt(s, levels, values);
    if (out.ssr < best.ssr) {
      best = out;
    }
  }

  FitResult result;
  result.cdf = best.params.to_cdf();
  result.fit_rms = std::sqrt(best.ssr / static_cast<double>(levels.size()));
  result.degraded = best.degraded;
  result.iterations = best.iterations;
  result.cdf.validate();
  return result;
}

std::vector<FitResult> fit_forecast(const QuantileForecast& raw, double min_spread_kw) {
  const QuantileForecast smoothed = smooth_quantiles(raw);
  std::vector<FitResult> fits;
  fits.reserve(smoothed.steps.size());
  for (const auto& block : smoothed.steps) {
    std::vector<double> levels(block.size());
    std::vector<double> values(block.size());
    for (std::size_t i = 0; i < block.size(); ++i) {
      levels[i] = block[i].level;
      values[i] = block[i].value_kw;
    }
    FitResult fit = fit_double_logistic(levels, values);
    if (min_spread_kw > 0.0) {
      const double cap = 1.0 / min_spread_kw;
      fit.cdf.inv_scale1 = std::min(fit.cdf.inv_scale1, cap);
      fit.cdf.inv_scale2 = std::min(fit.cdf.inv_scale2, cap);
    }
    fits.push_back(fit);
  }
  return fits;
}

ProsumptionModel center(std::span<const FitResult> fits, double step_hours, int start_hour) {
  ProsumptionModel model;
  model.step_hours = step_hours;
  model.start_hour = start_hour;
  model.expected_kw.reserve(fits.size());
  model.deviation_cdfs.reserve(fits.size());
  model.fit_rms.reserve(fits.size());
  for (const FitResult& fit : fits) {
    const double mean = fit.cdf.mean();
    model.expected_kw.push_back(mean);
    model.deviation_cdfs.push_back(fit.cdf.shifted(-mean));
    model.fit_rms.push_back(fit.fit_rms);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Synthetic forecasts
// ---------------------------------------------------------------------------

SyntheticProfile profile_from_name(std::string_view name) {
  if (name == "pv_dominant") {
    return SyntheticProfile::pv_dominant;
  }
  if (name == "flat") {
    return SyntheticProfile::flat;
  }
  if (name == "asymmetric_morning") {
    return SyntheticProfile::asymmetric_morning;
  }
  throw std::runtime_error("unknown synthetic profile '" + std::string(name) + "'");
}

std::string profile_name(SyntheticProfile profile) {
  switch (profile) {
    case SyntheticProfile::pv_dominant:
      return "pv_dominant";
    case SyntheticProfile::flat:
      return "flat";
    case SyntheticProfile::asymmetric_morning:
      return "asymmetric_morning";
  }
  return "?";
}

namespace {

double jitter(std::uint64_t seed, std::uint64_t step, std::uint64_t field) {
  // Deterministic uniform in [-1, 1).
  const std::uint64_t h = splitmix64(seed ^ splitmix64(step * 1315423911ull + field));
  return 2.0 * to_unit_interval(h) - 1.0;
}

DoubleLogisticCdf mixture_from_shape(double mean, double width, double mass1, double gap,
                                     double scale_ratio) {
  DoubleLogisticCdf f;
  f.mass1 = mass1;
  f.mass2 = 1.0 - mass1;
  // Component locations chosen so the mixture mean equals `mean` exactly.
  f.loc1 = mean - f.mass2 * gap;
  f.loc2 = mean + f.mass1 * gap;
  f.inv_scale1 = 1.0 / width;
  f.inv_scale2 = 1.0 / (width * scale_ratio);
  return f;
}

}  // namespace

QuantileForecast synth_forecast(std::uint64_t seed, SyntheticProfile profile,
                                std::size_t horizon) {
  if (horizon == 0) {
    throw std::invalid_argument("synth_forecast: horizon must be >= 1");
  }
  QuantileForecast out;
  out.step_hours = 1.0;
  out.start_hour = 6;
  out.steps.resize(horizon);

  for (std::size_t k = 0; k < horizon; ++k) {
    DoubleLogisticCdf shape;
    switch (profile) {
      case SyntheticProfile::flat: {
        // One shared curve; the seed perturbs it once, not per step.
        const double mean = 0.5 + 0.2 * jitter(seed, 0, 1);
        const double width = 0.5 * (1.0 + 0.15 * jitter(seed, 0, 2));
        shape = mixture_from_shape(mean, width, 0.5, 1.0, 1.3);
        break;
      }
      case SyntheticProfile::pv_dominant: {
        const double kd = static_cast<double>(k);
        const double base = 0.6 + 0.5 * std::exp(-std::pow((kd - 1.0) / 1.5, 2)) +
                            0.9 * std::exp(-std::pow((kd - 13.0) / 2.0, 2));
        const double pv = 5.2 * std::exp(-std::pow((kd - 7.0) / 2.6, 2));
        const double mean = base - pv + 0.05 * jitter(seed, k, 1);
        const double width = (0.28 + 0.85 * std::exp(-std::pow((kd - 7.0) / 3.2, 2))) *
                             (1.0 + 0.1 * jitter(seed, k, 2));
        // Midday PV hours lean left-heavy, evening consumption right-heavy.
        const double lean = std::exp(-std::pow((kd - 7.0) / 3.0, 2));
        const double mass1 = 0.5 + 0.18 * lean + 0.05 * jitter(seed, k, 3);
        const double gap = width * (1.2 + 0.5 * lean + 0.15 * jitter(seed, k, 4));
        shape = mixture_from_shape(mean, width, mass1, gap, 1.0 + 0.4 * lean);
        break;
      }
      case SyntheticProfile::asymmetric_morning: {
        if (k == 0) {
          // Rare high-consumption event: small mass far out on the right.
          shape = mixture_from_shape(0.9 + 0.1 * jitter(seed, k, 1), 0.35, 0.85, 4.0, 2.2);
        } else {
          const double kd = static_cast<double>(k);
          const double mean = 0.7 + 0.4 * std::exp(-std::pow((kd - 12.0) / 4.0, 2)) +
                              0.05 * jitter(seed, k, 1);
          const double width = 0.4 * (1.0 + 0.1 * jitter(seed, k, 2));
          shape = mixture_from_shape(mean, width, 0.6 + 0.05 * jitter(seed, k, 3),
                                     width * 1.4, 1.2);
        }
        break;
      }
    }
    shape.validate();
    auto& block = out.steps[k];
    block.reserve(99);
    for (int q = 1; q <= 99; ++q) {
      const double level = static_cast<double>(q) / 100.0;
      block.push_back({level, quantile(shape, level)});
    }
  }
  out.validate(true);
  return out;
}

// ---------------------------------------------------------------------------
// Fitted-model JSON
// ---------------------------------------------------------------------------

void write_fit_json(const std::filesystem::path& path, std::span<const FitResult> fits) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t k = 0; k < fits.size(); ++k) {
    const DoubleLogisticCdf& f = fits[k].cdf;
    arr.push_back({{"step", k},
                   {"w1", f.mass1},
                   {"w2", f.inv_scale1},
                   {"w3", f.loc1},
                   {"w4", f.mass2},
                   {"w5", f.inv_scale2},
                   {"w6", f.loc2},
                   {"fit_rms", fits[k].fit_rms}});
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write fit json: " + path.string());
  }
  out << arr.dump(2) << "\n";
}

std::vector<FitResult> read_fit_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open fit json: " + path.string());
  }
  nlohmann::json arr = nlohmann::json::parse(in);
  std::vector<FitResult> fits(arr.size());
  for (const auto& rec : arr) {
    const std::size_t k = rec.at("step").get<std::size_t>();
    if (k >= fits.size()) {
      throw std::runtime_error("fit json: step index out of range");
    }
    FitResult& fit = fits[k];
    fit.cdf.mass1 = rec.at("w1").get<double>();
    fit.cdf.inv_scale1 = rec.at("w2").get<double>();
    fit.cdf.loc1 = rec.at("w3").get<double>();
    fit.cdf.mass2 = rec.at("w4").get<double>();
    fit.cdf.inv_scale2 = rec.at("w5").get<double>();
    fit.cdf.loc2 = rec.at("w6").get<double>();
    fit.fit_rms = rec.at("fit_rms").get<double>();
    fit.cdf.validate();
  }
  return fits;
}

}  // namespace prosched
