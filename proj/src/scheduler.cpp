#include "prosched/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <random>
#include <cstdlib>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace prosched {

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

CostWeights CostWeights::case1(std::size_t horizon) {
  CostWeights w;
  w.c1 = 2.0;
  w.c2 = 1.0;
  w.c3.assign(horizon, 0.0);
  w.c4.assign(horizon, 0.0);
  return w;
}

CostWeights CostWeights::case2(std::size_t horizon) {
  CostWeights w;
  w.c1 = 2.0;
  w.c2 = 1.0;
  w.c3.assign(horizon, 0.5);
  w.c4.assign(horizon, 0.5);
  return w;
}

CostWeights CostWeights::case3(std::size_t horizon) {
  CostWeights w;
  w.c1 = 2.0;
  w.c2 = 1.0;
  w.c3.assign(horizon, 2.0);
  w.c4.assign(horizon, 2.0);
  for (std::size_t k : {std::size_t{6}, std::size_t{7}}) {
    if (k < horizon) {
      w.c4[k] = 100.0;
    }
  }
  return w;
}

void CostWeights::validate(std::size_t horizon) const {
  if (c1 < 0.0 || c2 < 0.0) {
    throw std::invalid_argument("CostWeights: c1/c2 must be non-negative");
  }
  if (c3.size() != horizon || c4.size() != horizon) {
    throw std::invalid_argument("CostWeights: c3/c4 length must equal the horizon");
  }
  for (std::size_t k = 0; k < horizon; ++k) {
    if (c3[k] < 0.0 || c4[k] < 0.0) {
      throw std::invalid_argument("CostWeights: c3/c4 must be non-negative");
    }
  }
}

// ---------------------------------------------------------------------------
// Problem assembly
// ---------------------------------------------------------------------------

Problem build_problem(const ProsumptionModel& model, const BatterySpec& battery,
                      const CostWeights& weights, const QuadratureConfig& quad,
                      CostPairing pairing) {
  if (model.horizon() == 0 || model.deviation_cdfs.size() != model.horizon()) {
    throw std::invalid_argument("build_problem: inconsistent model horizon");
  }
  battery.validate();
  weights.validate(model.horizon());
  quad.validate();

  Problem p;
  p.model = model;
  p.battery = battery;
  p.weights = weights;
  p.quad = quad;
  p.pairing = pairing;
  p.bounds_fixed_zero = true;
  for (std::size_t k = 0; k < model.horizon(); ++k) {
    if (weights.c3[k] != 0.0 || weights.c4[k] != 0.0) {
      p.bounds_fixed_zero = false;
      break;
    }
  }
  p.tail_lo.reserve(model.horizon());
  p.tail_hi.reserve(model.horizon());
  p.panel_points.reserve(model.horizon());
  for (const DoubleLogisticCdf& f : model.deviation_cdfs) {
    f.validate();
    p.tail_lo.push_back(quantile(f, quad.tail_cutoff_prob));
    p.tail_hi.push_back(quantile(f, 1.0 - quad.tail_cutoff_prob));
    p.panel_points.push_back(moment_breakpoints(f));
  }
  return p;
}

namespace {

struct StepTerms {
  double p1{0.0}, p2{0.0};      // saturation probabilities
  double f1{0.0}, f2{0.0};      // densities at the bounds
  double e_neg{0.0}, e_pos{0.0};  // signed grid-deviation expectations
};

StepTerms eval_step_terms(const Problem& P, std::size_t k, double xl, double xu) {
  const DoubleLogisticCdf& f = P.model.deviation_cdfs[k];
  StepTerms t;
  t.p1 = cdf_eval(f, xl);
  t.p2 = 1.0 - cdf_eval(f, xu);
  t.f1 = pdf_eval(f, xl);
  t.f2 = pdf_eval(f, xu);
  const std::span<const double> pts(P.panel_points[k]);
  if (xl > P.tail_lo[k]) {
    t.e_neg = partial_first_moment(f, P.tail_lo[k], xl, xl, P.quad.node_count, pts);
  }
  if (xu < P.tail_hi[k]) {
    t.e_pos = partial_first_moment(f, xu, P.tail_hi[k], xu, P.quad.node_count, pts);
  }
  return t;
}

// Deviation-cost term and its partial derivatives wrt (x_lower, x_upper).
// Uses dE_neg/dx_lower = -p1 and dE_pos/dx_upper = -p2 (Leibniz rule).
struct DevTerm {
  double value{0.0};
  double d_xl{0.0};
  double d_xu{0.0};
};

DevTerm dev_cost(const Problem& P, std::size_t k, const StepTerms& t) {
  DevTerm out;
  const double c3 = P.weights.c3[k];
  const double c4 = P.weights.c4[k];
  if (P.pairing == CostPairing::matched) {
    out.value = c3 * t.p2 * t.e_pos + c4 * t.p1 * (-t.e_neg);
    out.d_xu = c3 * (-t.f2 * t.e_pos - t.p2 * t.p2);
    out.d_xl = c4 * (t.f1 * (-t.e_neg) + t.p1 * t.p1);
  } else {
    out.value = c3 * t.p1 * t.e_pos + c4 * t.p2 * t.e_neg;
    out.d_xl = c3 * t.f1 * t.e_pos - c4 * t.p2 * t.p1;
    out.d_xu = -c3 * t.p1 * t.p2 - c4 * t.f2 * t.e_neg;
  }
  return out;
}

constexpr double sign_of(double p) { return p > 0.0 ? 1.0 : (p < 0.0 ? -1.0 : 0.0); }

// --------------------------------------------------------------------------
// Flattened decision layout: z = [p_B(0..K-1) | x_lower(0..K-1) | x_upper(..)]
// --------------------------------------------------------------------------

struct Box {
  std::vector<double> lo, hi;
};

double project_scalar(double v, double lo, double hi) { return std::clamp(v, lo, hi); }

void project(std::vector<double>& z, const Box& box) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = project_scalar(z[i], box.lo[i], box.hi[i]);
  }
}

// Augmented-Lagrangian state: multipliers for the four inequality groups.
struct Multipliers {
  std::vector<double> energy_lo;  // e_min - e(k) - dE_min(k) <= 0, k = 1..K
  std::vector<double> energy_hi;  // e(k) + dE_max(k) - e_max <= 0, k = 1..K
  std::vector<double> power_lo;   // p_min - p_B(k) - x_lower(k) <= 0
  std::vector<double> power_hi;   // p_B(k) + x_upper(k) - p_max <= 0

  explicit Multipliers(std::size_t horizon)
      : energy_lo(horizon, 0.0), energy_hi(horizon, 0.0), power_lo(horizon, 0.0),
        power_hi(horizon, 0.0) {}
};

struct ConstraintValues {
  std::vector<double> energy_lo, energy_hi, power_lo, power_hi;
  double max_violation{0.0};
};

// Evaluates the augmented Lagrangian (or the plain objective/Lagrangian) and
// its gradient. The |p_B| in the state recursion may use the softplus
// surrogate during early rounds; everything else is exact.
class Evaluator {
 public:
  Evaluator(const Problem& problem, bool include_dev_terms)
      : P(problem), K(problem.horizon()), dev_terms_(include_dev_terms) {}

  // Constraint values with the exact |.| dynamics.
  ConstraintValues constraints(std::span<const double> z) const {
    ConstraintValues c;
    c.energy_lo.resize(K);
    c.energy_hi.resize(K);
    c.power_lo.resize(K);
    c.power_hi.resize(K);
    const double t = P.battery.step_hours;
    const double mu = P.battery.mu;
    double e = P.battery.e0;
    double de_min = 0.0;
    double de_max = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double pb = z[k];
      const double xl = z[K + k];
      const double xu = z[2 * K + k];
      e -= t * pb + t * mu * std::abs(pb);
      de_min -= t * (1.0 + mu) * xu;
      de_max -= t * (1.0 - mu) * xl;
      c.energy_lo[k] = P.battery.e_min - (e + de_min);
      c.energy_hi[k] = (e + de_max) - P.battery.e_max;
      c.power_lo[k] = P.battery.p_min - (pb + xl);
      c.power_hi[k] = (pb + xu) - P.battery.p_max;
      c.max_violation = std::max({c.max_violation, c.energy_lo[k], c.energy_hi[k],
                                  c.power_lo[k], c.power_hi[k]});
    }
    c.max_violation = std::max(c.max_violation, 0.0);
    return c;
  }

  // value = objective + AL penalty; fills grad when non-empty. `lagrangian`
  // switches the penalty to the plain inner product (for KKT stationarity).
  // `kink_grad`, when non-empty, receives the minimal-norm subgradient: the
  // |p_B| loss term makes the gradient set-valued at p_B = 0, and a kink
  // coordinate is stationary when zero lies inside
  // [center - halfwidth, center + halfwidth].
  double value_grad(std::span<const double> z, const Multipliers& mult, double rho,
                     bool smooth_abs, bool lagrangian, std::span<double> grad,
                     std::span<double> kink_grad = {}) const {
    const bool want_grad = !grad.empty();
    if (want_grad) {
      std::fill(grad.begin(), grad.end(), 0.0);
    }
    const double t = P.battery.step_hours;
    const double mu = P.battery.mu;
    const double beta = 1e3;

    double value = 0.0;
    // Objective part.
    for (std::size_t k = 0; k < K; ++k) {
      const double pb = z[k];
      const double pg = P.model.expected_kw[k] - pb;
      const double gp = std::max(pg, 0.0);
      const double gn = std::min(pg, 0.0);
      value += P.weights.c1 * gp * gp + P.weights.c2 * gn * gn;
      if (want_grad) {
        grad[k] += -2.0 * P.weights.c1 * gp - 2.0 * P.weights.c2 * gn;
      }
      if (dev_terms_ && (P.weights.c3[k] != 0.0 || P.weights.c4[k] != 0.0)) {
        const StepTerms terms = eval_step_terms(P, k, z[K + k], z[2 * K + k]);
        const DevTerm dev = dev_cost(P, k, terms);
        value += dev.value;
        if (want_grad) {
          grad[K + k] += dev.d_xl;
          grad[2 * K + k] += dev.d_xu;
        }
      }
    }

    // Constraint part: forward state recursion; losses smoothed on request.
    std::vector<double> loss_slope(K);
    std::vector<double> m_elo(K), m_ehi(K), m_plo(K), m_pup(K);
    {
      double e = P.battery.e0;
      double de_min = 0.0;
      double de_max = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double pb = z[k];
        const double xl = z[K + k];
        const double xu = z[2 * K + k];
        double abs_pb;
        if (smooth_abs) {
          abs_pb = std::abs(pb) + 2.0 / beta * std::log1p(std::exp(-beta * std::abs(pb)));
          loss_slope[k] = std::tanh(0.5 * beta * pb);
        } else {
          abs_pb = std::abs(pb);
          loss_slope[k] = sign_of(pb);
        }
        e -= t * pb + t * mu * abs_pb;
        de_min -= t * (1.0 + mu) * xu;
        de_max -= t * (1.0 - mu) * xl;

        const double g_elo = P.battery.e_min - (e + de_min);
        const double g_ehi = (e + de_max) - P.battery.e_max;
        const double g_plo = P.battery.p_min - (pb + xl);
        const double g_pup = (pb + xu) - P.battery.p_max;

        const auto fold = [&](double g, double lam, double& m_out) {
          if (lagrangian) {
            m_out = lam;
            value += lam * g;
          } else {
            const double m = std::max(0.0, lam + rho * g);
            m_out = m;
            value += (m * m - lam * lam) / (2.0 * rho);
          }
        };
        fold(g_elo, mult.energy_lo[k], m_elo[k]);
        fold(g_ehi, mult.energy_hi[k], m_ehi[k]);
        fold(g_plo, mult.power_lo[k], m_plo[k]);
        fold(g_pup, mult.power_hi[k], m_pup[k]);
      }
    }

    if (want_grad) {
      // Suffix sums turn the O(K^2) chain-rule accumulation into O(K).
      double s_elo = 0.0;
      double s_ehi = 0.0;
      for (std::size_t rk = K; rk-- > 0;) {
        s_elo += m_elo[rk];
        s_ehi += m_ehi[rk];
        grad[rk] += t * (1.0 + mu * loss_slope[rk]) * (s_elo - s_ehi);
        grad[K + rk] += -t * (1.0 - mu) * s_ehi;
        grad[2 * K + rk] += t * (1.0 + mu) * s_elo;
        grad[rk] += -m_plo[rk] + m_pup[rk];
        grad[K + rk] += -m_plo[rk];
        grad[2 * K + rk] += m_pup[rk];
        if (!kink_grad.empty()) {
          kink_grad[K + rk] = grad[K + rk];
          kink_grad[2 * K + rk] = grad[2 * K + rk];
          // Band within which a coordinate counts as sitting at the kink:
          // moving it the remaining distance to zero changes value and
          // feasibility by far less than the solve tolerances.
          const double halfwidth = t * mu * std::abs(s_elo - s_ehi);
          if (!smooth_abs && std::abs(z[rk]) <= 2e-5 && halfwidth > 0.0) {
            const double center =
                grad[rk] - t * mu * loss_slope[rk] * (s_elo - s_ehi);
            const double mag = std::max(0.0, std::abs(center) - halfwidth);
            kink_grad[rk] = (center >= 0.0 ? mag : -mag);
          } else {
            kink_grad[rk] = grad[rk];
          }
        }
      }
    }
    return value;
  }

  const Problem& P;
  const std::size_t K;

 private:
  bool dev_terms_;
};

double projected_gradient_norm(std::span<const double> z, std::span<const double> grad,
                               const Box& box) {
  double norm = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double moved = project_scalar(z[i] - grad[i], box.lo[i], box.hi[i]);
    norm = std::max(norm, std::abs(z[i] - moved));
  }
  return norm;
}

struct InnerResult {
  double value_start{0.0};
  double value_end{0.0};
  double pg_norm{0.0};
  int iterations{0};
  bool converged{false};
};

// Projected L-BFGS with Armijo backtracking. Gradient components pushing
// against an active bound are masked out of the two-loop recursion, the
// memory is dropped whenever the active set changes (stale pairs from a
// different face produce ascent directions), and the initial Hessian guess
// is a diagonal built from the cost weights to tame the curvature spread a
// c4 = 100 window creates.
InnerResult minimize_inner(const Evaluator& eval, const Multipliers& mult, double rho,
                           bool smooth_abs, const Box& box,
                           std::span<const double> precond, std::vector<double>& z,
                           double tol, int max_iter) {
  const std::size_t n = z.size();
  project(z, box);
  std::vector<double> grad(n), kink(n), trial(n), trial_grad(n), trial_kink(n), masked(n),
      direction(n);
  std::vector<char> active(n, 0), prev_active(n, 0);
  double value = eval.value_grad(z, mult, rho, smooth_abs, false, grad, kink);

  InnerResult result;
  result.value_start = value;
  result.value_end = value;

  std::deque<std::pair<std::vector<double>, std::vector<double>>> memory;  // (s, y)
  constexpr std::size_t kMemory = 12;
  double value_checkpoint = value;

  for (int it = 0; it < max_iter; ++it) {
    result.pg_norm = projected_gradient_norm(z, kink, box);
    if (result.pg_norm <= tol) {
      result.converged = true;
      break;
    }
    if (it % 50 == 0) {
      if (it > 0 && value_checkpoint - value <= 1e-14 * (1.0 + std::abs(value))) {
        break;  // no measurable progress over the last 50 iterations
      }
      value_checkpoint = value;
    }
    result.iterations = it + 1;

    bool mask_changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const bool at_lo = z[i] <= box.lo[i] + 1e-14 && grad[i] > 0.0;
      const bool at_hi = z[i] >= box.hi[i] - 1e-14 && grad[i] < 0.0;
      active[i] = (at_lo || at_hi) ? 1 : 0;
      masked[i] = active[i] ? 0.0 : grad[i];
      mask_changed = mask_changed || (it > 0 && active[i] != prev_active[i]);
    }
    prev_active = active;
    if (mask_changed) {
      memory.clear();
    }

    // Two-loop recursion on the masked gradient.
    direction = masked;
    {
      std::vector<double> alpha(memory.size());
      for (std::size_t mi = memory.size(); mi-- > 0;) {
        const auto& [s, y] = memory[mi];
        double sy = 0.0;
        double sd = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          sy += s[i] * y[i];
          sd += s[i] * direction[i];
        }
        alpha[mi] = sd / sy;
        for (std::size_t i = 0; i < n; ++i) {
          direction[i] -= alpha[mi] * y[i];
        }
      }
      double gamma = 1.0;
      if (!memory.empty()) {
        const auto& [s, y] = memory.back();
        double sy = 0.0;
        double yh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          sy += s[i] * y[i];
          yh += y[i] * y[i] / precond[i];
        }
        gamma = sy / std::max(yh, 1e-300);
      }
      for (std::size_t i = 0; i < n; ++i) {
        direction[i] *= gamma / precond[i];
      }
      for (std::size_t mi = 0; mi < memory.size(); ++mi) {
        const auto& [s, y] = memory[mi];
        double yd = 0.0;
        double sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          yd += y[i] * direction[i];
          sy += s[i] * y[i];
        }
        const double coeff = alpha[mi] - yd / sy;
        for (std::size_t i = 0; i < n; ++i) {
          direction[i] += coeff * s[i];
        }
      }
    }
    double descent = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      direction[i] = -direction[i];
      descent += direction[i] * masked[i];
    }

    bool accepted = false;
    // Skip the quasi-Newton attempt outright when it is not a descent
    // direction; the preconditioned steepest step always is.
    for (int attempt = (descent < 0.0 ? 0 : 1); attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        for (std::size_t i = 0; i < n; ++i) {
          direction[i] = -masked[i] / precond[i];
        }
      }
      double alpha = 1.0;
      for (int ls = 0; ls < 30; ++ls) {
        for (std::size_t i = 0; i < n; ++i) {
          trial[i] = project_scalar(z[i] + alpha * direction[i], box.lo[i], box.hi[i]);
        }
        double dir_deriv = 0.0;
        double step_norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          dir_deriv += grad[i] * (trial[i] - z[i]);
          step_norm = std::max(step_norm, std::abs(trial[i] - z[i]));
        }
        if (step_norm < 1e-16) {
          break;
        }
        const double trial_value =
            eval.value_grad(trial, mult, rho, smooth_abs, false, {});
        if (trial_value <= value + 1e-4 * dir_deriv && dir_deriv < 0.0) {
          eval.value_grad(trial, mult, rho, smooth_abs, false, trial_grad, trial_kink);
          std::vector<double> s(n), y(n);
          double sy = 0.0;
          double ss = 0.0;
          double yy = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial[i] - z[i];
            y[i] = trial_grad[i] - grad[i];
            sy += s[i] * y[i];
            ss += s[i] * s[i];
            yy += y[i] * y[i];
          }
          if (sy > 1e-10 * std::sqrt(ss * yy)) {
            memory.emplace_back(std::move(s), std::move(y));
            if (memory.size() > kMemory) {
              memory.pop_front();
            }
          }
          z = trial;
          grad = trial_grad;
          kink = trial_kink;
          value = trial_value;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
    }
    if (!accepted) {
      break;  // stalled: no descent along either direction
    }
    result.value_end = value;
  }
  result.value_end = value;
  result.pg_norm = projected_gradient_norm(z, kink, box);
  if (result.pg_norm <= tol) {
    result.converged = true;
  }
  return result;
}

struct AlRun {
  std::vector<double> z;
  Multipliers mult;
  bool converged{false};
  int outer_iterations{0};
  long inner_iterations{0};
  double pg_norm{0.0};
  double max_violation{0.0};
  std::vector<std::pair<double, double>> trace;

  explicit AlRun(std::size_t horizon) : mult(horizon) {}
};

AlRun run_augmented_lagrangian(const Evaluator& eval, const Box& box, std::vector<double> start,
                               const SolverConfig& cfg) {
  const std::size_t K = eval.K;
  AlRun run(K);
  run.z = std::move(start);
  project(run.z, box);

  // Static curvature estimates per block; only relative magnitudes matter.
  std::vector<double> precond(3 * K, 1.0);
  for (std::size_t k = 0; k < K; ++k) {
    precond[k] = 2.0 * (eval.P.weights.c1 + eval.P.weights.c2) + 1.0;
    precond[K + k] = std::max(1.0, 0.5 * eval.P.weights.c4[k]);
    precond[2 * K + k] = std::max(1.0, 0.5 * eval.P.weights.c3[k]);
  }

  double rho = cfg.penalty_init;
  double viol_prev = std::numeric_limits<double>::infinity();
  std::vector<double> grad(run.z.size());

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    run.outer_iterations = outer + 1;
    const bool smooth = outer < cfg.smoothed_outer_rounds;
    const double inner_tol =
        std::max(cfg.grad_tol, 1e-2 * std::pow(0.2, static_cast<double>(outer)));
    const InnerResult inner = minimize_inner(eval, run.mult, rho, smooth, box, precond,
                                             run.z, inner_tol, cfg.max_inner);
    run.inner_iterations += inner.iterations;
    run.trace.emplace_back(inner.value_start, inner.value_end);

    const ConstraintValues c = eval.constraints(run.z);
    run.max_violation = c.max_violation;

    // Convergence is judged with the exact dynamics (subgradient-aware).
    std::vector<double> kink(run.z.size());
    eval.value_grad(run.z, run.mult, rho, false, false, grad, kink);
    run.pg_norm = projected_gradient_norm(run.z, kink, box);
    if (std::getenv("PROSCHED_DEBUG_AL")) {
      std::size_t worst = 0;
      double wv = 0.0;
      for (std::size_t i = 0; i < run.z.size(); ++i) {
        const double moved = project_scalar(run.z[i] - kink[i], box.lo[i], box.hi[i]);
        if (std::abs(run.z[i] - moved) > wv) {
          wv = std::abs(run.z[i] - moved);
          worst = i;
        }
      }
      std::fprintf(stderr,
                   "outer %d rho %.1e viol %.2e pg %.3e inner_pg %.3e it %d worst i=%zu "
                   "(block %zu step %zu) z=%.6g g=%.6g kink=%.6g\n",
                   outer, rho, c.max_violation, run.pg_norm, inner.pg_norm, inner.iterations,
                   worst, worst / K, worst % K, run.z[worst], grad[worst], kink[worst]);
    }
    if (!smooth && c.max_violation <= cfg.constraint_tol && run.pg_norm <= cfg.grad_tol) {
      run.converged = true;
      break;
    }

    for (std::size_t k = 0; k < K; ++k) {
      run.mult.energy_lo[k] = std::max(0.0, run.mult.energy_lo[k] + rho * c.energy_lo[k]);
      run.mult.energy_hi[k] = std::max(0.0, run.mult.energy_hi[k] + rho * c.energy_hi[k]);
      run.mult.power_lo[k] = std::max(0.0, run.mult.power_lo[k] + rho * c.power_lo[k]);
      run.mult.power_hi[k] = std::max(0.0, run.mult.power_hi[k] + rho * c.power_hi[k]);
    }
    // Grow the penalty only while the violation is above tolerance and not
    // shrinking fast enough; once feasible, leave the subproblem alone.
    if (c.max_violation > cfg.constraint_tol && c.max_violation > 0.5 * viol_prev) {
      rho = std::min(rho * cfg.penalty_growth, 1e8);
    }
    viol_prev = c.max_violation;
  }
  return run;
}

Box make_box(const Problem& P, const SolverConfig& cfg, bool pin_bounds_zero) {
  const std::size_t K = P.horizon();
  Box box;
  box.lo.assign(3 * K, 0.0);
  box.hi.assign(3 * K, 0.0);
  const double swing = P.battery.p_max - P.battery.p_min;
  for (std::size_t k = 0; k < K; ++k) {
    if (cfg.pin_nominal) {
      box.lo[k] = box.hi[k] = (*cfg.pin_nominal)[k];
    } else {
      box.lo[k] = P.battery.p_min;
      box.hi[k] = P.battery.p_max;
    }
    if (pin_bounds_zero) {
      box.lo[K + k] = box.hi[K + k] = 0.0;
      box.lo[2 * K + k] = box.hi[2 * K + k] = 0.0;
    } else {
      box.lo[K + k] = -swing;
      box.hi[K + k] = 0.0;
      box.lo[2 * K + k] = 0.0;
      box.hi[2 * K + k] = swing;
    }
  }
  return box;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public objective surface
// ---------------------------------------------------------------------------

namespace {

std::vector<double> flatten(const DecisionVector& v) {
  const std::size_t K = v.horizon();
  if (v.x_lower.size() != K || v.x_upper.size() != K) {
    throw std::invalid_argument("DecisionVector: component lengths differ");
  }
  std::vector<double> z(3 * K);
  std::copy(v.p_b.begin(), v.p_b.end(), z.begin());
  std::copy(v.x_lower.begin(), v.x_lower.end(), z.begin() + K);
  std::copy(v.x_upper.begin(), v.x_upper.end(), z.begin() + 2 * K);
  return z;
}

DecisionVector unflatten(std::span<const double> z, std::size_t K) {
  DecisionVector v;
  v.p_b.assign(z.begin(), z.begin() + K);
  v.x_lower.assign(z.begin() + K, z.begin() + 2 * K);
  v.x_upper.assign(z.begin() + 2 * K, z.end());
  return v;
}

}  // namespace

double objective_eval(const DecisionVector& v, const Problem& problem) {
  if (v.horizon() != problem.horizon()) {
    throw std::invalid_argument("objective_eval: horizon mismatch");
  }
  const Evaluator eval(problem, true);
  const Multipliers none(problem.horizon());
  return eval.value_grad(flatten(v), none, 1.0, false, true, {});
}

std::vector<double> objective_grad(const DecisionVector& v, const Problem& problem) {
  if (v.horizon() != problem.horizon()) {
    throw std::invalid_argument("objective_grad: horizon mismatch");
  }
  const Evaluator eval(problem, true);
  const Multipliers none(problem.horizon());
  std::vector<double> grad(3 * problem.horizon());
  eval.value_grad(flatten(v), none, 1.0, false, true, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

namespace {

ScheduleSolution assemble_solution(const Problem& P, const AlRun& run, long extra_inner) {
  const std::size_t K = P.horizon();
  ScheduleSolution sol;
  sol.decisions = unflatten(run.z, K);
  if (P.bounds_fixed_zero) {
    std::fill(sol.decisions.x_lower.begin(), sol.decisions.x_lower.end(), 0.0);
    std::fill(sol.decisions.x_upper.begin(), sol.decisions.x_upper.end(), 0.0);
  }
  sol.converged = run.converged;
  sol.outer_iterations = run.outer_iterations;
  sol.inner_iterations = run.inner_iterations + extra_inner;
  sol.outer_trace = run.trace;
  sol.mult_energy_lo = run.mult.energy_lo;
  sol.mult_energy_hi = run.mult.energy_hi;
  sol.mult_power_lo = run.mult.power_lo;
  sol.mult_power_hi = run.mult.power_hi;

  std::vector<AllocationBounds> bounds(K);
  std::vector<double> exp_dev(K);
  for (std::size_t k = 0; k < K; ++k) {
    bounds[k] = {sol.decisions.x_lower[k], sol.decisions.x_upper[k]};
    exp_dev[k] = expected_battery_dev(P.model.deviation_cdfs[k], bounds[k], P.quad);
  }
  sol.trajectory = build_trajectory(sol.decisions.p_b, bounds, exp_dev, P.battery);

  sol.steps.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    SolutionStep& s = sol.steps[k];
    s.p_b = sol.decisions.p_b[k];
    s.x_lower = bounds[k].lower;
    s.x_upper = bounds[k].upper;
    s.p_g = P.model.expected_kw[k] - s.p_b;
    s.p_g_pos = std::max(s.p_g, 0.0);
    s.p_g_neg = std::min(s.p_g, 0.0);
    s.p_b_pos = std::max(s.p_b, 0.0);
    s.p_b_neg = std::min(s.p_b, 0.0);
    s.e = sol.trajectory.e[k];
    s.de_min = sol.trajectory.de_min[k];
    s.de_max = sol.trajectory.de_max[k];
    s.e_expected = sol.trajectory.e_expected[k];
    const StepTerms t = eval_step_terms(P, k, s.x_lower, s.x_upper);
    s.p1 = t.p1;
    s.p2 = t.p2;
    s.exp_dev_neg = t.e_neg;
    s.exp_dev_pos = t.e_pos;
    const MixedGridDeviation grid = build_grid_dev(P.model.deviation_cdfs[k], bounds[k]);
    s.q05 = grid_dev_quantile(grid, 0.05);
    s.q95 = grid_dev_quantile(grid, 0.95);
  }
  sol.objective = objective_eval(sol.decisions, P);
  sol.kkt = kkt_residuals(sol, P);
  return sol;
}

}  // namespace

ScheduleSolution solve(const Problem& problem, const SolverConfig& config) {
  const std::size_t K = problem.horizon();
  problem.battery.validate();
  if (config.pin_nominal && config.pin_nominal->size() != K) {
    throw std::invalid_argument("solve: pinned nominal schedule has wrong length");
  }

  // Warm start: deterministic core schedule (allocation bounds pinned at
  // zero, deviation terms dropped) from the clamped expected prosumption.
  const Evaluator core_eval(problem, false);
  const Box core_box = make_box(problem, config, true);
  std::vector<double> z0(3 * K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    z0[k] = std::clamp(problem.model.expected_kw[k], problem.battery.p_min,
                       problem.battery.p_max);
  }
  AlRun core = run_augmented_lagrangian(core_eval, core_box, std::move(z0), config);

  if (problem.bounds_fixed_zero && !config.pin_nominal) {
    return assemble_solution(problem, core, 0);
  }

  const Evaluator full_eval(problem, true);
  const Box full_box = make_box(problem, config, problem.bounds_fixed_zero);

  std::vector<std::vector<double>> starts;
  starts.push_back(core.z);
  if (config.restarts > 0) {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int r = 0; r < config.restarts; ++r) {
      std::vector<double> s(3 * K, 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        s[k] = problem.battery.p_min +
               unit(rng) * (problem.battery.p_max - problem.battery.p_min);
      }
      starts.push_back(std::move(s));
    }
  }

  std::optional<AlRun> best;
  double best_objective = std::numeric_limits<double>::infinity();
  long inner_total = core.inner_iterations;
  for (auto& start : starts) {
    AlRun run = run_augmented_lagrangian(full_eval, full_box, std::move(start), config);
    inner_total += run.inner_iterations;
    const double obj =
        objective_eval(unflatten(run.z, K), problem);
    const bool better =
        !best || (run.converged && !best->converged) ||
        (run.converged == best->converged && obj < best_objective);
    if (better) {
      best_objective = obj;
      best = std::move(run);
    }
  }
  return assemble_solution(problem, *best, inner_total - best->inner_iterations);
}

KktDiagnostics kkt_residuals(const ScheduleSolution& solution, const Problem& problem) {
  const std::size_t K = problem.horizon();
  KktDiagnostics d;
  const std::vector<double> z = flatten(solution.decisions);
  const Evaluator eval(problem, true);

  Multipliers mult(K);
  if (solution.mult_energy_lo.size() == K) {
    mult.energy_lo = solution.mult_energy_lo;
    mult.energy_hi = solution.mult_energy_hi;
    mult.power_lo = solution.mult_power_lo;
    mult.power_hi = solution.mult_power_hi;
  }

  std::vector<double> grad(3 * K), kink(3 * K);
  eval.value_grad(z, mult, 1.0, false, true, grad, kink);
  const Box box = make_box(problem, SolverConfig{}, problem.bounds_fixed_zero);
  d.stationarity = projected_gradient_norm(z, kink, box);

  const ConstraintValues c = eval.constraints(z);
  d.max_violation = 0.0;
  d.worst_constraint = "none";
  const auto consider = [&](const std::vector<double>& g, const char* name) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g[k] > d.max_violation) {
        d.max_violation = g[k];
        d.worst_step = k;
        d.worst_constraint = name;
      }
    }
  };
  consider(c.energy_lo, "energy_lower");
  consider(c.energy_hi, "energy_upper");
  consider(c.power_lo, "power_lower");
  consider(c.power_hi, "power_upper");

  for (std::size_t k = 0; k < K; ++k) {
    d.max_complementarity = std::max(
        {d.max_complementarity, std::abs(mult.energy_lo[k] * c.energy_lo[k]),
         std::abs(mult.energy_hi[k] * c.energy_hi[k]),
         std::abs(mult.power_lo[k] * c.power_lo[k]),
         std::abs(mult.power_hi[k] * c.power_hi[k])});
  }
  for (const SolutionStep& s : solution.steps) {
    d.split_complementarity = std::max(
        {d.split_complementarity, std::abs(s.p_g_pos * s.p_g_neg),
         std::abs(s.p_b_pos * s.p_b_neg)});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void write_solution_json(const std::filesystem::path& path, const ScheduleSolution& solution,
                         const std::string& config_hash, std::uint64_t seed,
                         CostPairing pairing) {
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t k = 0; k < solution.steps.size(); ++k) {
    const SolutionStep& s = solution.steps[k];
    steps.push_back({{"step", k},
                     {"p_b", s.p_b},
                     {"x_lower", s.x_lower},
                     {"x_upper", s.x_upper},
                     {"p_g", s.p_g},
                     {"p_g_pos", s.p_g_pos},
                     {"p_g_neg", s.p_g_neg},
                     {"p_b_pos", s.p_b_pos},
                     {"p_b_neg", s.p_b_neg},
                     {"e", s.e},
                     {"de_min", s.de_min},
                     {"de_max", s.de_max},
                     {"e_expected", s.e_expected},
                     {"p1", s.p1},
                     {"p2", s.p2},
                     {"exp_dev_neg", s.exp_dev_neg},
                     {"exp_dev_pos", s.exp_dev_pos},
                     {"q05", s.q05},
                     {"q95", s.q95}});
  }
  const std::size_t K = solution.steps.size();
  nlohmann::json doc = {
      {"meta",
       {{"config_hash", config_hash},
        {"seed", seed},
        {"pairing", pairing == CostPairing::matched ? "matched" : "crossed"},
        {"converged", solution.converged},
        {"objective", solution.objective},
        {"outer_iterations", solution.outer_iterations},
        {"inner_iterations", solution.inner_iterations},
        {"kkt",
         {{"stationarity", solution.kkt.stationarity},
          {"max_violation", solution.kkt.max_violation},
          {"max_complementarity", solution.kkt.max_complementarity},
          {"split_complementarity", solution.kkt.split_complementarity}}}}},
      {"final_state",
       {{"e", solution.trajectory.e[K]},
        {"de_min", solution.trajectory.de_min[K]},
        {"de_max", solution.trajectory.de_max[K]},
        {"e_expected", solution.trajectory.e_expected[K]}}},
      {"steps", steps}};
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write solution json: " + path.string());
  }
  out << doc.dump(2) << "\n";
}

ScheduleSolution read_solution_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open solution json: " + path.string());
  }
  const nlohmann::json doc = nlohmann::json::parse(in);
  ScheduleSolution sol;
  const auto& steps = doc.at("steps");
  const std::size_t K = steps.size();
  sol.steps.resize(K);
  sol.decisions.p_b.resize(K);
  sol.decisions.x_lower.resize(K);
  sol.decisions.x_upper.resize(K);
  sol.trajectory.p_b.resize(K);
  sol.trajectory.e.resize(K + 1);
  sol.trajectory.de_min.resize(K + 1);
  sol.trajectory.de_max.resize(K + 1);
  sol.trajectory.e_expected.resize(K + 1);
  for (const auto& rec : steps) {
    const std::size_t k = rec.at("step").get<std::size_t>();
    if (k >= K) {
      throw std::runtime_error("solution json: step index out of range");
    }
    SolutionStep& s = sol.steps[k];
    s.p_b = rec.at("p_b").get<double>();
    s.x_lower = rec.at("x_lower").get<double>();
    s.x_upper = rec.at("x_upper").get<double>();
    s.p_g = rec.at("p_g").get<double>();
    s.p_g_pos = rec.at("p_g_pos").get<double>();
    s.p_g_neg = rec.at("p_g_neg").get<double>();
    s.p_b_pos = rec.at("p_b_pos").get<double>();
    s.p_b_neg = rec.at("p_b_neg").get<double>();
    s.e = rec.at("e").get<double>();
    s.de_min = rec.at("de_min").get<double>();
    s.de_max = rec.at("de_max").get<double>();
    s.e_expected = rec.at("e_expected").get<double>();
    s.p1 = rec.at("p1").get<double>();
    s.p2 = rec.at("p2").get<double>();
    s.exp_dev_neg = rec.at("exp_dev_neg").get<double>();
    s.exp_dev_pos = rec.at("exp_dev_pos").get<double>();
    s.q05 = rec.at("q05").get<double>();
    s.q95 = rec.at("q95").get<double>();
    sol.decisions.p_b[k] = s.p_b;
    sol.decisions.x_lower[k] = s.x_lower;
    sol.decisions.x_upper[k] = s.x_upper;
    sol.trajectory.p_b[k] = s.p_b;
    sol.trajectory.e[k] = s.e;
    sol.trajectory.de_min[k] = s.de_min;
    sol.trajectory.de_max[k] = s.de_max;
    sol.trajectory.e_expected[k] = s.e_expected;
  }
  const auto& fin = doc.at("final_state");
  sol.trajectory.e[K] = fin.at("e").get<double>();
  sol.trajectory.de_min[K] = fin.at("de_min").get<double>();
  sol.trajectory.de_max[K] = fin.at("de_max").get<double>();
  sol.trajectory.e_expected[K] = fin.at("e_expected").get<double>();
  const auto& meta = doc.at("meta");
  sol.converged = meta.at("converged").get<bool>();
  sol.objective = meta.at("objective").get<double>();
  sol.outer_iterations = meta.at("outer_iterations").get<int>();
  sol.inner_iterations = meta.at("inner_iterations").get<long>();
  sol.kkt.stationarity = meta.at("kkt").at("stationarity").get<double>();
  sol.kkt.max_violation = meta.at("kkt").at("max_violation").get<double>();
  sol.kkt.max_complementarity = meta.at("kkt").at("max_complementarity").get<double>();
  sol.kkt.split_complementarity = meta.at("kkt").at("split_complementarity").get<double>();
  return sol;
}

void write_plot_csv(const std::filesystem::path& path, const ScheduleSolution& solution) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write plot csv: " + path.string());
  }
  out << "step,p_g_nominal,q05,q95,prob_up,prob_down,exp_up,exp_down,"
         "e_nominal,e_min_env,e_max_env,e_expected\n";
  char buf[360];
  for (std::size_t k = 0; k < solution.steps.size(); ++k) {
    const SolutionStep& s = solution.steps[k];
    std::snprintf(buf, sizeof(buf),
                  "%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  k, s.p_g, s.q05, s.q95, s.p2, s.p1, s.exp_dev_pos, s.exp_dev_neg, s.e,
                  s.e + s.de_min, s.e + s.de_max, s.e_expected);
    out << buf;
  }
}

}  // namespace prosched
