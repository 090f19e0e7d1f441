#include "prosched/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "prosched/rng.hpp"

namespace prosched {

namespace {

constexpr double kZeroDevTol = 1e-12;   // clamp arithmetic yields exact zeros
constexpr double kEnvelopeTol = 1e-6;   // kWh / kW feasibility tolerance
constexpr std::size_t kHistogramBins = 8192;
constexpr std::size_t kBatchSize = 32768;

struct ScheduleContext {
  std::size_t K{0};
  std::vector<double> p_b, p_g, x_lower, x_upper, expected_kw;
  std::vector<double> env_low, env_high;  // size K+1
  BatterySpec spec;

  static ScheduleContext from(const ScheduleSolution& sol, const BatterySpec& spec) {
    ScheduleContext ctx;
    ctx.K = sol.steps.size();
    ctx.spec = spec;
    ctx.p_b.resize(ctx.K);
    ctx.p_g.resize(ctx.K);
    ctx.x_lower.resize(ctx.K);
    ctx.x_upper.resize(ctx.K);
    ctx.expected_kw.resize(ctx.K);
    for (std::size_t k = 0; k < ctx.K; ++k) {
      ctx.p_b[k] = sol.steps[k].p_b;
      ctx.p_g[k] = sol.steps[k].p_g;
      ctx.x_lower[k] = sol.steps[k].x_lower;
      ctx.x_upper[k] = sol.steps[k].x_upper;
      ctx.expected_kw[k] = sol.steps[k].p_g + sol.steps[k].p_b;
    }
    ctx.env_low.resize(ctx.K + 1);
    ctx.env_high.resize(ctx.K + 1);
    for (std::size_t k = 0; k <= ctx.K; ++k) {
      ctx.env_low[k] = sol.trajectory.e[k] + sol.trajectory.de_min[k];
      ctx.env_high[k] = sol.trajectory.e[k] + sol.trajectory.de_max[k];
    }
    return ctx;
  }
};

// One-sample replay of the allocation rule and both state recursions.
struct ReplayRow {
  std::vector<double> battery_dev, grid_dev, state_exact, state_split;

  explicit ReplayRow(std::size_t K)
      : battery_dev(K), grid_dev(K), state_exact(K + 1), state_split(K + 1) {}
};

void replay_sample(const ScheduleContext& ctx, std::span<const double> deviation,
                   ReplayRow& row) {
  const double t = ctx.spec.step_hours;
  const double mu = ctx.spec.mu;
  row.state_exact[0] = ctx.spec.e0;
  row.state_split[0] = ctx.spec.e0;
  for (std::size_t k = 0; k < ctx.K; ++k) {
    const double dp = deviation[k];
    const double db = std::clamp(dp, ctx.x_lower[k], ctx.x_upper[k]);
    const double dg = dp - db;
    row.battery_dev[k] = db;
    row.grid_dev[k] = dg;
    const double pb = ctx.p_b[k];
    row.state_exact[k + 1] =
        row.state_exact[k] - t * (pb + db) - t * mu * std::abs(pb + db);
    row.state_split[k + 1] =
        row.state_split[k] - t * (pb + db) - t * mu * std::abs(pb) - t * mu * std::abs(db);
  }
}

// Shared accumulation so the dense and the streaming paths produce the same
// statistics by construction.
class StatsAccumulator {
 public:
  StatsAccumulator(const ScheduleContext& ctx, bool with_histograms,
                   const ProsumptionModel* model)
      : ctx_(ctx), K_(ctx.K) {
    c_p1_.assign(K_, 0);
    c_p2_.assign(K_, 0);
    c_zero_.assign(K_, 0);
    s_neg_.assign(K_, 0.0);
    ss_neg_.assign(K_, 0.0);
    s_pos_.assign(K_, 0.0);
    ss_pos_.assign(K_, 0.0);
    s_exact_.assign(K_ + 1, 0.0);
    s_split_.assign(K_ + 1, 0.0);
    if (with_histograms) {
      if (model == nullptr) {
        throw std::invalid_argument("histogram accumulation needs the prosumption model");
      }
      hist_.resize(K_);
      hist_lo_.resize(K_);
      hist_w_.resize(K_);
      for (std::size_t k = 0; k < K_; ++k) {
        const DoubleLogisticCdf& f = model->deviation_cdfs[k];
        double lo = quantile(f, 1e-9) - ctx.x_lower[k] - 0.1;
        const double hi = quantile(f, 1.0 - 1e-9) - ctx.x_upper[k] + 0.1;
        const double w = std::max((hi - lo) / static_cast<double>(kHistogramBins), 1e-9);
        lo = std::floor(lo / w) * w;  // align bins so zero sits on an edge
        const std::size_t bins =
            static_cast<std::size_t>(std::ceil((hi - lo) / w)) + 2;
        hist_lo_[k] = lo;
        hist_w_[k] = w;
        hist_[k].assign(bins, 0);
      }
    }
  }

  void add(std::span<const double> deviation, const ReplayRow& row) {
    ++n_;
    for (std::size_t k = 0; k < K_; ++k) {
      const double dp = deviation[k];
      const double dg = row.grid_dev[k];
      if (dp <= ctx_.x_lower[k]) {
        ++c_p1_[k];
      }
      if (dp >= ctx_.x_upper[k]) {
        ++c_p2_[k];
      }
      const bool is_zero = std::abs(dg) < kZeroDevTol;
      if (is_zero) {
        ++c_zero_[k];
      } else if (!hist_.empty()) {
        const auto& h = hist_[k];
        long idx = static_cast<long>(std::floor((dg - hist_lo_[k]) / hist_w_[k]));
        idx = std::clamp(idx, 0L, static_cast<long>(h.size()) - 1);
        ++hist_[k][static_cast<std::size_t>(idx)];
      }
      const double vneg = std::min(dg, 0.0);
      const double vpos = std::max(dg, 0.0);
      s_neg_[k] += vneg;
      ss_neg_[k] += vneg * vneg;
      s_pos_[k] += vpos;
      ss_pos_[k] += vpos * vpos;
      s_dp_ += dp;
      ss_dp_ += dp * dp;

      const double realized_power = ctx_.p_b[k] + row.battery_dev[k];
      if (realized_power < ctx_.spec.p_min - kEnvelopeTol ||
          realized_power > ctx_.spec.p_max + kEnvelopeTol) {
        ++power_violations_;
      }
    }
    for (std::size_t k = 0; k <= K_; ++k) {
      const double se = row.state_exact[k];
      const double ssplit = row.state_split[k];
      s_exact_[k] += se;
      s_split_[k] += ssplit;
      if (ssplit < ctx_.env_low[k] - kEnvelopeTol ||
          ssplit > ctx_.env_high[k] + kEnvelopeTol) {
        ++split_violations_;
      }
      if (se < ctx_.env_low[k] - kEnvelopeTol) {
        ++exact_lower_violations_;
      }
      if (se > ctx_.env_high[k] + kEnvelopeTol) {
        ++exact_upper_excursions_;
        max_excursion_ = std::max(max_excursion_, se - ctx_.env_high[k]);
      }
    }
  }

  RolloutStats finish() const {
    RolloutStats out;
    out.samples = n_;
    const double n = static_cast<double>(n_);
    out.p1_hat.resize(K_);
    out.p2_hat.resize(K_);
    out.zero_atom_hat.resize(K_);
    out.mean_dev_neg.resize(K_);
    out.mean_dev_pos.resize(K_);
    out.sd_dev_neg.resize(K_);
    out.sd_dev_pos.resize(K_);
    out.q05.assign(K_, 0.0);
    out.q95.assign(K_, 0.0);
    for (std::size_t k = 0; k < K_; ++k) {
      out.p1_hat[k] = c_p1_[k] / n;
      out.p2_hat[k] = c_p2_[k] / n;
      out.zero_atom_hat[k] = c_zero_[k] / n;
      out.mean_dev_neg[k] = s_neg_[k] / n;
      out.mean_dev_pos[k] = s_pos_[k] / n;
      out.sd_dev_neg[k] =
          std::sqrt(std::max(0.0, ss_neg_[k] / n - out.mean_dev_neg[k] * out.mean_dev_neg[k]));
      out.sd_dev_pos[k] =
          std::sqrt(std::max(0.0, ss_pos_[k] / n - out.mean_dev_pos[k] * out.mean_dev_pos[k]));
      if (!hist_.empty()) {
        out.q05[k] = histogram_quantile(k, 0.05);
        out.q95[k] = histogram_quantile(k, 0.95);
      }
    }
    out.mean_state_exact.resize(K_ + 1);
    out.mean_state_split.resize(K_ + 1);
    for (std::size_t k = 0; k <= K_; ++k) {
      out.mean_state_exact[k] = s_exact_[k] / n;
      out.mean_state_split[k] = s_split_[k] / n;
    }
    out.split_envelope_violations = split_violations_;
    out.exact_lower_violations = exact_lower_violations_;
    out.power_violations = power_violations_;
    out.exact_upper_excursions = exact_upper_excursions_;
    out.max_exact_upper_excursion = max_excursion_;
    const double nk = n * static_cast<double>(K_);
    out.mean_total_deviation = s_dp_ / nk;
    out.sd_total_deviation =
        std::sqrt(std::max(0.0, ss_dp_ / nk - out.mean_total_deviation * out.mean_total_deviation));
    return out;
  }

 private:
  double histogram_quantile(std::size_t k, double q) const {
    // Bin walk with the zero atom spliced in at value 0 (bins are aligned so
    // no bin straddles zero).
    const auto& h = hist_[k];
    const double lo = hist_lo_[k];
    const double w = hist_w_[k];
    const double target = q * static_cast<double>(n_);
    double cum = 0.0;
    bool zero_seen = false;
    for (std::size_t b = 0; b < h.size(); ++b) {
      const double bin_lo = lo + w * static_cast<double>(b);
      if (!zero_seen && bin_lo >= 0.0) {
        zero_seen = true;
        cum += static_cast<double>(c_zero_[k]);
        if (cum >= target) {
          return 0.0;
        }
      }
      if (h[b] > 0) {
        const double next = cum + static_cast<double>(h[b]);
        if (next >= target) {
          return bin_lo + w * (target - cum) / static_cast<double>(h[b]);
        }
        cum = next;
      }
    }
    if (!zero_seen) {
      cum += static_cast<double>(c_zero_[k]);
      if (cum >= target) {
        return 0.0;
      }
    }
    return lo + w * static_cast<double>(h.size());
  }

  const ScheduleContext& ctx_;
  std::size_t K_;
  std::size_t n_{0};
  std::vector<long> c_p1_, c_p2_, c_zero_;
  std::vector<double> s_neg_, ss_neg_, s_pos_, ss_pos_;
  std::vector<double> s_exact_, s_split_;
  std::vector<std::vector<std::uint32_t>> hist_;
  std::vector<double> hist_lo_, hist_w_;
  std::size_t split_violations_{0};
  std::size_t exact_lower_violations_{0};
  std::size_t power_violations_{0};
  std::size_t exact_upper_excursions_{0};
  double max_excursion_{0.0};
  double s_dp_{0.0};
  double ss_dp_{0.0};
};

double sampled_deviation(const ProsumptionModel& model, const CounterRng& rng, bool antithetic,
                         std::size_t sample, std::size_t step) {
  double u;
  if (antithetic) {
    u = rng.uniform(sample / 2, step);
    if (sample % 2 == 1) {
      u = 1.0 - u;
    }
  } else {
    u = rng.uniform(sample, step);
  }
  return quantile(model.deviation_cdfs[step], u);
}

}  // namespace

void McConfig::validate() const {
  if (sample_count < 1) {
    throw std::invalid_argument("McConfig: sample_count must be >= 1");
  }
}

Realizations sample_prosumption(const ProsumptionModel& model, const McConfig& cfg) {
  cfg.validate();
  const std::size_t K = model.horizon();
  Realizations out;
  out.samples = cfg.sample_count;
  out.steps = K;
  out.data.resize(cfg.sample_count * K);
  const CounterRng rng(cfg.seed);
  for (std::size_t n = 0; n < cfg.sample_count; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      out.data[n * K + k] =
          model.expected_kw[k] + sampled_deviation(model, rng, cfg.antithetic, n, k);
    }
  }
  return out;
}

Rollouts simulate_allocation(const Realizations& realizations, const ScheduleSolution& sol,
                             const BatterySpec& spec) {
  const std::size_t K = sol.steps.size();
  if (realizations.steps != K) {
    throw std::invalid_argument("simulate_allocation: horizon mismatch");
  }
  const ScheduleContext ctx = ScheduleContext::from(sol, spec);
  Rollouts out;
  out.samples = realizations.samples;
  out.steps = K;
  out.battery_dev.resize(out.samples * K);
  out.grid_dev.resize(out.samples * K);
  out.state_exact.resize(out.samples * (K + 1));
  out.state_split.resize(out.samples * (K + 1));
  out.p_b = ctx.p_b;
  out.p_g = ctx.p_g;
  out.x_lower = ctx.x_lower;
  out.x_upper = ctx.x_upper;
  out.env_low = ctx.env_low;
  out.env_high = ctx.env_high;
  out.spec = spec;

  ReplayRow row(K);
  std::vector<double> deviation(K);
  for (std::size_t n = 0; n < out.samples; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      deviation[k] = realizations.at(n, k) - ctx.expected_kw[k];
    }
    replay_sample(ctx, deviation, row);
    std::copy(row.battery_dev.begin(), row.battery_dev.end(), out.battery_dev.begin() + n * K);
    std::copy(row.grid_dev.begin(), row.grid_dev.end(), out.grid_dev.begin() + n * K);
    std::copy(row.state_exact.begin(), row.state_exact.end(),
              out.state_exact.begin() + n * (K + 1));
    std::copy(row.state_split.begin(), row.state_split.end(),
              out.state_split.begin() + n * (K + 1));
  }
  return out;
}

RolloutStats empirical_stats(const Rollouts& rollouts) {
  const std::size_t K = rollouts.steps;
  ScheduleContext ctx;
  ctx.K = K;
  ctx.spec = rollouts.spec;
  ctx.p_b = rollouts.p_b;
  ctx.p_g = rollouts.p_g;
  ctx.x_lower = rollouts.x_lower;
  ctx.x_upper = rollouts.x_upper;
  ctx.env_low = rollouts.env_low;
  ctx.env_high = rollouts.env_high;

  StatsAccumulator acc(ctx, false, nullptr);
  ReplayRow row(K);
  std::vector<double> deviation(K);
  for (std::size_t n = 0; n < rollouts.samples; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      row.battery_dev[k] = rollouts.battery_dev[n * K + k];
      row.grid_dev[k] = rollouts.grid_dev[n * K + k];
      deviation[k] = row.battery_dev[k] + row.grid_dev[k];
    }
    for (std::size_t k = 0; k <= K; ++k) {
      row.state_exact[k] = rollouts.state_exact[n * (K + 1) + k];
      row.state_split[k] = rollouts.state_split[n * (K + 1) + k];
    }
    acc.add(deviation, row);
  }
  RolloutStats stats = acc.finish();

  // Dense data allows exact order statistics for the quantiles.
  std::vector<double> column(rollouts.samples);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t n = 0; n < rollouts.samples; ++n) {
      column[n] = rollouts.grid_dev[n * K + k];
    }
    std::sort(column.begin(), column.end());
    const auto pick = [&](double q) {
      const std::size_t r = static_cast<std::size_t>(
          std::min(std::max(std::ceil(q * static_cast<double>(column.size())) - 1.0, 0.0),
                   static_cast<double>(column.size() - 1)));
      return column[r];
    };
    stats.q05[k] = pick(0.05);
    stats.q95[k] = pick(0.95);
  }
  return stats;
}

RolloutStats run_oracle(const ProsumptionModel& model, const ScheduleSolution& sol,
                        const BatterySpec& spec, const McConfig& cfg) {
  cfg.validate();
  const std::size_t K = sol.steps.size();
  if (model.horizon() != K) {
    throw std::invalid_argument("run_oracle: horizon mismatch");
  }
  const ScheduleContext ctx = ScheduleContext::from(sol, spec);
  StatsAccumulator acc(ctx, true, &model);
  const CounterRng rng(cfg.seed);
  ReplayRow row(K);
  std::vector<double> deviation(K);
  for (std::size_t base = 0; base < cfg.sample_count; base += kBatchSize) {
    const std::size_t end = std::min(cfg.sample_count, base + kBatchSize);
    for (std::size_t n = base; n < end; ++n) {
      for (std::size_t k = 0; k < K; ++k) {
        deviation[k] = sampled_deviation(model, rng, cfg.antithetic, n, k);
      }
      replay_sample(ctx, deviation, row);
      acc.add(deviation, row);
    }
  }
  return acc.finish();
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

ComparisonReport compare(const ScheduleSolution& sol, const RolloutStats& stats,
                         const TolerancePolicy& policy) {
  const std::size_t K = sol.steps.size();
  if (stats.p1_hat.size() != K) {
    throw std::invalid_argument("compare: horizon mismatch");
  }
  ComparisonReport report;
  const double n = static_cast<double>(stats.samples);

  const auto add_row = [&](std::size_t step, const std::string& quantity, double analytic,
                           double empirical, double tolerance) {
    const bool pass = std::abs(analytic - empirical) <= tolerance;
    report.rows.push_back({step, quantity, analytic, empirical, tolerance, pass});
    if (!pass) {
      ++report.failed;
    }
  };
  const auto prob_tol = [&](double p) {
    return std::max(policy.prob_sigma * std::sqrt(std::max(p * (1.0 - p), 0.0) / n),
                    policy.prob_floor);
  };

  for (std::size_t k = 0; k < K; ++k) {
    const SolutionStep& s = sol.steps[k];
    const double zero_atom = std::max(0.0, 1.0 - s.p1 - s.p2);
    add_row(k, "p1", s.p1, stats.p1_hat[k], prob_tol(s.p1));
    add_row(k, "p2", s.p2, stats.p2_hat[k], prob_tol(s.p2));
    add_row(k, "zero_atom", zero_atom, stats.zero_atom_hat[k], prob_tol(zero_atom));
    add_row(k, "exp_dev_neg", s.exp_dev_neg, stats.mean_dev_neg[k],
            std::max(policy.mean_sigma * stats.sd_dev_neg[k] / std::sqrt(n),
                     policy.mean_floor_kw));
    add_row(k, "exp_dev_pos", s.exp_dev_pos, stats.mean_dev_pos[k],
            std::max(policy.mean_sigma * stats.sd_dev_pos[k] / std::sqrt(n),
                     policy.mean_floor_kw));
    add_row(k, "q05", s.q05, stats.q05[k], policy.quantile_floor_kw);
    add_row(k, "q95", s.q95, stats.q95[k], policy.quantile_floor_kw);
  }

  add_row(0, "split_envelope_violations", 0.0,
          static_cast<double>(stats.split_envelope_violations), 0.0);
  add_row(0, "exact_lower_envelope_violations", 0.0,
          static_cast<double>(stats.exact_lower_violations), 0.0);
  add_row(0, "power_violations", 0.0, static_cast<double>(stats.power_violations), 0.0);
  add_row(0, "total_deviation_mean", 0.0, stats.mean_total_deviation,
          std::max(policy.mean_sigma * stats.sd_total_deviation /
                       std::sqrt(n * static_cast<double>(K)),
                   policy.mean_floor_kw));

  // Triangle-inequality conservativeness: the exact-loss mean state never
  // falls below the model's lower bound (and dominates the split-loss mean).
  double worst_lower_gap = 0.0;
  double worst_split_gap = 0.0;
  for (std::size_t k = 0; k <= K; ++k) {
    const double env_low = sol.trajectory.e[k] + sol.trajectory.de_min[k];
    worst_lower_gap = std::min(worst_lower_gap, stats.mean_state_exact[k] - env_low);
    worst_split_gap =
        std::min(worst_split_gap, stats.mean_state_exact[k] - stats.mean_state_split[k]);
  }
  add_row(0, "exact_mean_state_above_lower_bound", 0.0, std::min(0.0, worst_lower_gap),
          policy.state_tol_kwh);
  add_row(0, "exact_mean_state_above_split_mean", 0.0, std::min(0.0, worst_split_gap),
          policy.state_tol_kwh);

  report.pass = report.failed == 0;
  return report;
}

void write_comparison_json(const std::filesystem::path& path, const ComparisonReport& report,
                           const McConfig& cfg) {
  nlohmann::json checks = nlohmann::json::array();
  for (const CheckRow& row : report.rows) {
    checks.push_back({{"step", row.step},
                      {"quantity", row.quantity},
                      {"analytic", row.analytic},
                      {"empirical", row.empirical},
                      {"tolerance", row.tolerance},
                      {"pass", row.pass}});
  }
  const nlohmann::json doc = {{"summary",
                               {{"pass", report.pass},
                                {"checks_total", report.rows.size()},
                                {"checks_failed", report.failed},
                                {"samples", cfg.sample_count},
                                {"seed", cfg.seed},
                                {"antithetic", cfg.antithetic}}},
                              {"checks", checks}};
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write comparison json: " + path.string());
  }
  out << doc.dump(2) << "\n";
}

}  // namespace prosched
