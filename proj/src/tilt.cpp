#include "brw/tilt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brw/errors.hpp"

namespace brw {

namespace {

// Environment window backing the population-mode evaluations. The left
// margin grows on demand; counter-based sampling keeps the overlap stable.
ZetaView population_window(const EnvironmentLaw& law, std::int64_t n, std::uint64_t seed,
                           std::int64_t margin = 4096) {
  return zeta_of(sample_environment(law, {1 - margin, std::max<std::int64_t>(n, 1)}, seed));
}

struct AvgEval {
  MgfEval avg;
  std::vector<MgfEval> per_site;
};

AvgEval avg_at(const ZetaView& z, std::int64_t n, double eta, const TruncationConfig& trunc) {
  AvgEval out;
  out.per_site = log_mgf_range(z, 1, n, eta, trunc);
  for (const auto& e : out.per_site) {
    out.avg.value += e.value;
    out.avg.d1 += e.d1;
    out.avg.d2 += e.d2;
    out.avg.trunc_bound = std::max(out.avg.trunc_bound, e.trunc_bound);
    out.avg.slow_convergence |= e.slow_convergence;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.avg.value *= inv;
  out.avg.d1 *= inv;
  out.avg.d2 *= inv;
  return out;
}

}  // namespace

TiltSolution solve_eta_empirical(const ZetaView& zeta, std::int64_t n, double v,
                                 const TiltConfig& cfg) {
  if (!(v > 0.0)) throw InvalidArgument("solve_eta_empirical: v must be positive");
  if (n < 1) throw InvalidArgument("solve_eta_empirical: n must be >= 1");
  const double target = 1.0 / v;

  auto d1_at = [&](double eta) { return log_mgf_avg(zeta, n, eta, cfg.trunc); };

  // L' is increasing; a solution eta < 0 exists iff (Lbar_n)'(0-) > 1/v.
  MgfEval at_zero = d1_at(0.0);
  if (!at_zero.slow_convergence && at_zero.d1 < target)
    throw NoTiltSolution("solve_eta: (Lbar_n)'(0-) = " + std::to_string(at_zero.d1) +
                         " < 1/v = " + std::to_string(target) +
                         " (v below the empirical critical velocity)");

  // Bracket [lo, hi] with f(lo) < 0 <= f(hi), f = L' - 1/v.
  double hi = 0.0, f_hi = at_zero.d1 - target;
  double lo = -1.0;
  MgfEval e_lo = d1_at(lo);
  while (e_lo.d1 - target > 0.0) {
    hi = lo;
    f_hi = e_lo.d1 - target;
    lo *= 2.0;
    if (lo < cfg.eta_floor)
      throw NumericalError("solve_eta: no bracket above eta floor " +
                           std::to_string(cfg.eta_floor));
    e_lo = d1_at(lo);
  }
  double f_lo = e_lo.d1 - target;

  // Safeguarded Newton: quadratic once inside, bisection when a step
  // leaves the bracket.
  double eta = lo + (hi - lo) * f_lo / (f_lo - f_hi);  // secant start
  MgfEval e{};
  double f = 0.0;
  for (int it = 0; it < 100; ++it) {
    e = d1_at(eta);
    f = e.d1 - target;
    if (std::abs(f) <= cfg.residual_tol) break;
    if (f < 0.0)
      lo = eta;
    else
      hi = eta;
    double step = eta - f / e.d2;  // Newton; d2 = (Lbar_n)'' > 0
    if (!(step > lo && step < hi)) step = 0.5 * (lo + hi);
    eta = step;
  }

  TiltSolution sol;
  sol.v = v;
  sol.eta_bar = eta;
  sol.l_at_eta = e.value;
  sol.legendre = eta / v - e.value;
  sol.residual = std::abs(f);
  sol.mode = TiltMode::Empirical;
  sol.n = n;
  sol.in_delta = eta >= cfg.eta_lo && eta <= cfg.eta_hi;
  return sol;
}

TiltSolution solve_eta_population(const EnvironmentLaw& law, double v, std::int64_t n_mc,
                                  std::uint64_t seed, const TiltConfig& cfg) {
  const ZetaView z = population_window(law, n_mc, seed);
  TiltSolution sol;
  try {
    sol = solve_eta_empirical(z, n_mc, v, cfg);
  } catch (const NoTiltSolution&) {
    throw NoTiltSolution("solve_eta_population: v = " + std::to_string(v) +
                         " is at or below the critical velocity of this law");
  }
  sol.mode = TiltMode::Population;
  // Delta method: se(eta) = se(Lbar') / Lbar''.
  const AvgEval at_sol = avg_at(z, n_mc, sol.eta_bar, cfg.trunc);
  const std::int64_t n_batches = std::min<std::int64_t>(64, n_mc);
  double s = 0.0;
  for (std::int64_t b = 0; b < n_batches; ++b) {
    const std::int64_t lo = b * n_mc / n_batches;
    const std::int64_t hi = (b + 1) * n_mc / n_batches;
    double m = 0.0;
    for (std::int64_t k = lo; k < hi; ++k) m += at_sol.per_site[static_cast<std::size_t>(k)].d1;
    m /= static_cast<double>(hi - lo);
    s += (m - at_sol.avg.d1) * (m - at_sol.avg.d1);
  }
  if (n_batches > 1) {
    const double se_d1 = std::sqrt(s / static_cast<double>(n_batches - 1) /
                                   static_cast<double>(n_batches));
    sol.std_error = se_d1 / at_sol.avg.d2;
  }
  return sol;
}

double lyapunov_empirical(const ZetaView& zeta, std::int64_t n, double es, double v,
                          const TiltConfig& cfg) {
  if (v < 0.0) throw InvalidArgument("lyapunov: v must be >= 0");
  if (v == 0.0) return es;
  try {
    const TiltSolution sol = solve_eta_empirical(zeta, n, v, cfg);
    return es - v * sol.legendre;
  } catch (const NoTiltSolution&) {
    // Linear branch on [0, v_c]: lambda = es + v L(0).
    const MgfEval at_zero = log_mgf_avg(zeta, n, 0.0, cfg.trunc);
    return es + v * at_zero.value;
  }
}

double lyapunov(const EnvironmentLaw& law, double v, std::int64_t n_mc, std::uint64_t seed,
                const TiltConfig& cfg) {
  const ZetaView z = population_window(law, n_mc, seed);
  return lyapunov_empirical(z, n_mc, law.es(), v, cfg);
}

CriticalVelocity critical_velocity(const EnvironmentLaw& law, std::int64_t n_mc,
                                   std::uint64_t seed, const TiltConfig& cfg) {
  const PopulationMgf pop = log_mgf_population(law, 0.0, n_mc, seed, cfg.trunc);
  CriticalVelocity out;
  out.d1_at_zero = pop.avg.d1;
  out.slow_convergence = pop.avg.slow_convergence;
  if (!(pop.avg.d1 < cfg.d1_divergence)) {
    out.v_c = 0.0;
    return out;
  }
  out.v_c = 1.0 / pop.avg.d1;
  out.std_error = pop.se_d1 / (pop.avg.d1 * pop.avg.d1);
  return out;
}

ZeroVelocity zero_velocity(const EnvironmentLaw& law, std::int64_t n_mc, std::uint64_t seed,
                           const TiltConfig& cfg, double v_max) {
  const double es = law.es();
  if (!(es > 0.0)) throw InvalidArgument("zero_velocity: es must be positive");
  const ZetaView z = population_window(law, n_mc, seed);
  auto lam = [&](double v) { return lyapunov_empirical(z, n_mc, es, v, cfg); };

  double lo = 0.0;  // lambda(0) = es > 0
  double hi = 1.0;
  double f_hi = lam(hi);
  while (f_hi > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > v_max) {
      std::string diag = "zero_velocity: no sign change up to v_max; lambda samples:";
      for (double v = 1.0; v <= v_max; v *= 4.0)
        diag += " lambda(" + std::to_string(v) + ")=" + std::to_string(lam(v));
      throw NumericalError(diag);
    }
    f_hi = lam(hi);
  }
  for (int it = 0; it < 64 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (lam(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  ZeroVelocity out;
  out.v0 = 0.5 * (lo + hi);
  out.lambda_residual = std::abs(lam(out.v0));

  const CriticalVelocity vc = critical_velocity(law, n_mc, seed, cfg);
  out.v_c = vc.v_c;
  // lambda'(v) = L(eta_bar(v)), so MC noise in L maps to v0 noise by
  // se_v0 = v0 * se_L / |L(eta_bar(v0))|.
  const TiltSolution sol = solve_eta_empirical(z, n_mc, out.v0, cfg);
  const PopulationMgf pop = log_mgf_population(law, sol.eta_bar, n_mc, seed, cfg.trunc);
  const double se_v0 = out.v0 * pop.se_value / std::max(1e-12, std::abs(sol.l_at_eta));
  out.margin = 3.0 * (se_v0 + vc.std_error);
  out.vel_holds = out.v0 - out.v_c > out.margin;
  return out;
}

LyapunovCurve lyapunov_curve(const EnvironmentLaw& law, std::span<const double> v_grid,
                             std::int64_t n_mc, std::uint64_t seed, const TiltConfig& cfg) {
  const ZetaView z = population_window(law, n_mc, seed);
  const double es = law.es();
  LyapunovCurve curve;
  for (double v : v_grid) {
    curve.v.push_back(v);
    double eta = std::numeric_limits<double>::quiet_NaN();
    double leg = std::numeric_limits<double>::quiet_NaN();
    double lam;
    if (v == 0.0) {
      lam = es;
    } else {
      try {
        const TiltSolution sol = solve_eta_empirical(z, n_mc, v, cfg);
        eta = sol.eta_bar;
        leg = sol.legendre;
        lam = es - v * sol.legendre;
      } catch (const NoTiltSolution&) {
        lam = es + v * log_mgf_avg(z, n_mc, 0.0, cfg.trunc).value;
      }
    }
    curve.lambda.push_back(lam);
    curve.eta_bar.push_back(eta);
    curve.legendre.push_back(leg);
  }
  const ZeroVelocity zv = zero_velocity(law, n_mc, seed, cfg);
  curve.v_c = zv.v_c;
  curve.v0 = zv.v0;
  curve.vel_holds = zv.vel_holds;
  return curve;
}

SigmaEstimates sigma_constants(const ZetaView& zeta_long, double v, const LagConfig& lag,
                               const TiltConfig& cfg) {
  const std::int64_t n = zeta_long.window.hi;
  if (n < 4 * lag.lag_cutoff)
    throw InvalidArgument("sigma_constants: window too short for the lag cutoff");
  const TiltSolution sol = solve_eta_empirical(zeta_long, n, v, cfg);
  const auto evals = log_mgf_range(zeta_long, 1, n, sol.eta_bar, cfg.trunc);

  std::vector<double> V(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    V[static_cast<std::size_t>(i)] = sol.eta_bar / v - evals[static_cast<std::size_t>(i)].value;
  double vbar = 0.0;
  for (double x : V) vbar += x;
  vbar /= static_cast<double>(n);

  auto gamma = [&](int j) {
    double s = 0.0;
    for (std::int64_t i = 0; i + j < n; ++i)
      s += (V[static_cast<std::size_t>(i)] - vbar) *
           (V[static_cast<std::size_t>(i + j)] - vbar);
    return s / static_cast<double>(n - j);
  };

  const double g0 = gamma(0);
  if (g0 <= 1e-14)
    throw DegenerateVariance("sigma_constants: Var(V_1) = " + std::to_string(g0) +
                             " (constant or near-constant environment)");
  std::vector<double> gs(static_cast<std::size_t>(lag.lag_cutoff) + 1);
  gs[0] = g0;
  double s2 = g0;
  for (int j = 1; j <= lag.lag_cutoff; ++j) {
    gs[static_cast<std::size_t>(j)] = gamma(j);
    s2 += 2.0 * gs[static_cast<std::size_t>(j)];
  }
  if (s2 <= 0.0)
    throw DegenerateVariance("sigma_constants: truncated variance series is non-positive");

  SigmaEstimates out;
  out.sigma_v2 = s2;
  out.eta_bar = sol.eta_bar;
  out.l_at_eta = sol.l_at_eta;
  out.sigma_bar_v = std::sqrt(s2 * v) / std::abs(sol.l_at_eta);
  out.lag_used = lag.lag_cutoff;

  // A posteriori decay check: geometric extrapolation of the covariance tail.
  double head = 0.0, tail = 0.0;
  for (int j = lag.lag_cutoff - 9; j <= lag.lag_cutoff - 5; ++j)
    head += std::abs(gs[static_cast<std::size_t>(j)]);
  for (int j = lag.lag_cutoff - 4; j <= lag.lag_cutoff; ++j)
    tail += std::abs(gs[static_cast<std::size_t>(j)]);
  const double r = head > 0.0 ? tail / head : 0.0;
  const double tail_est = r < 1.0 ? 2.0 * tail * r / (1.0 - r) : tail * 100.0;
  out.tail_warning = tail_est > lag.tail_warn_frac * s2;

  // Batched SE: recompute the truncated series on contiguous segments.
  const std::int64_t n_batches = 16;
  const std::int64_t seg = n / n_batches;
  if (seg > 4 * lag.lag_cutoff) {
    double acc = 0.0;
    for (std::int64_t b = 0; b < n_batches; ++b) {
      const std::int64_t off = b * seg;
      double m = 0.0;
      for (std::int64_t i = 0; i < seg; ++i) m += V[static_cast<std::size_t>(off + i)];
      m /= static_cast<double>(seg);
      double bs2 = 0.0;
      for (int j = 0; j <= lag.lag_cutoff; ++j) {
        double s = 0.0;
        for (std::int64_t i = 0; i + j < seg; ++i)
          s += (V[static_cast<std::size_t>(off + i)] - m) *
               (V[static_cast<std::size_t>(off + i + j)] - m);
        s /= static_cast<double>(seg - j);
        bs2 += (j == 0 ? 1.0 : 2.0) * s;
      }
      acc += (bs2 - s2) * (bs2 - s2);
    }
    out.se_sigma_v2 = std::sqrt(acc / static_cast<double>(n_batches - 1) /
                                static_cast<double>(n_batches));
  }
  return out;
}

double sigma_n_zeta(const ZetaView& zeta, double v, std::int64_t n, const TiltConfig& cfg) {
  const TiltSolution sol = solve_eta_empirical(zeta, n, v, cfg);
  const auto evals = log_mgf_range(zeta, 1, n, sol.eta_bar, cfg.trunc);
  double var_hn = 0.0;
  for (const auto& e : evals) var_hn += e.d2;
  return std::abs(sol.eta_bar) * std::sqrt(var_hn);
}

std::vector<double> w_n_path(const ZetaView& zeta, double v, std::int64_t n,
                             std::span<const double> t_grid, double sigma_v,
                             double legendre_pop, const TiltConfig& cfg) {
  if (!(sigma_v > 0.0)) throw DegenerateVariance("w_n_path: sigma_v must be positive");
  // F(m) = m (Lbar_m)^*(1/v), extended by linear interpolation in m.
  auto F = [&](std::int64_t m) {
    if (m == 0) return 0.0;
    return static_cast<double>(m) * solve_eta_empirical(zeta, m, v, cfg).legendre;
  };
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    if (t < 0.0) throw InvalidArgument("w_n_path: t must be >= 0");
    const double m = static_cast<double>(n) * t;
    const auto m0 = static_cast<std::int64_t>(std::floor(m));
    const double frac = m - static_cast<double>(m0);
    double f = F(m0);
    if (frac > 0.0) f += frac * (F(m0 + 1) - F(m0));
    out.push_back((f - m * legendre_pop) / (sigma_v * std::sqrt(static_cast<double>(n))));
  }
  return out;
}

}  // namespace brw
