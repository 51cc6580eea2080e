#include "brw/pam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brw/errors.hpp"
#include "brw/hitmgf.hpp"

namespace brw {

namespace {

constexpr double kLn2 = 0.6931471805599453;
const double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> potential_on(const Environment& env, Window domain) {
  if (!(env.window.lo <= domain.lo && env.window.hi >= domain.hi))
    throw DomainTooSmall("run_pam: environment window does not cover the domain");
  std::vector<double> pot(static_cast<std::size_t>(domain.size()));
  for (std::int64_t x = domain.lo; x <= domain.hi; ++x)
    pot[static_cast<std::size_t>(x - domain.lo)] = env.at(x);
  return pot;
}

LogField make_u0(U0Spec u0, Window domain) {
  return u0.kind == U0Spec::Delta0 ? make_delta0(domain) : make_left_block(domain, u0.C);
}

// Suffix sums of the mantissas, S[j] = sum_{k >= j} v[k].
void suffix_sums(const std::vector<double>& v, std::vector<double>& out) {
  out.resize(v.size());
  double acc = 0.0;
  for (std::size_t j = v.size(); j-- > 0;) {
    acc += v[j];
    out[j] = acc;
  }
}

PamSnapshot take_snapshot(const LogField& f, const std::vector<double>& suffix) {
  PamSnapshot s;
  s.t = f.time;
  s.x_lo = f.x_lo;
  s.ln_u.resize(f.v.size());
  s.ln_tail.resize(f.v.size());
  for (std::size_t j = 0; j < f.v.size(); ++j) {
    s.ln_u[j] = f.v[j] > 0.0 ? f.offset + std::log(f.v[j]) : kNegInf;
    s.ln_tail[j] = suffix[j] > 0.0 ? f.offset + std::log(suffix[j]) : kNegInf;
  }
  return s;
}

}  // namespace

double PamSnapshot::ln_tail_interp(double x) const {
  if (x <= static_cast<double>(x_lo)) return ln_tail.front();
  if (x >= static_cast<double>(x_hi())) return ln_tail.back();
  const double fl = std::floor(x);
  const auto i = static_cast<std::size_t>(static_cast<std::int64_t>(fl) - x_lo);
  const double frac = x - fl;
  return ln_tail[i] + frac * (ln_tail[i + 1] - ln_tail[i]);
}

PamResult run_pam(const Environment& env, U0Spec u0, double T, const PamConfig& cfg) {
  const auto pot = potential_on(env, cfg.domain);
  const double dt = resolve_dt(cfg.integ, env.max_xi());
  if (cfg.velocities.size() != cfg.lambdas.size())
    throw InvalidArgument("run_pam: velocities and lambdas must pair up");

  LogField f = make_u0(u0, cfg.domain);

  PamResult res;
  res.trace.m_bar_v.resize(cfg.velocities.size());
  res.trace.u_v.resize(cfg.velocities.size());
  if (cfg.tn_max >= 0)
    res.trace.tn.assign(static_cast<std::size_t>(cfg.tn_max) + 1,
                        std::numeric_limits<double>::quiet_NaN());

  // Double-buffered suffix sums for the step-resolution T_n detection.
  std::vector<double> suf_a, suf_b;
  suffix_sums(f.v, suf_a);
  double prev_offset = f.offset;
  bool cur_is_a = true;

  std::int64_t frontier = 0;
  auto ln_tail_of = [&](const std::vector<double>& suf, double offset, std::int64_t n) {
    if (n < cfg.domain.lo || n > cfg.domain.hi) return kNegInf;
    const double s = suf[static_cast<std::size_t>(n - cfg.domain.lo)];
    return s > 0.0 ? offset + std::log(s) : kNegInf;
  };
  // T_0 = 0 when the initial tail at frontier sites already crosses 1/2.
  if (cfg.tn_max >= 0)
    while (frontier <= cfg.tn_max && ln_tail_of(suf_a, f.offset, frontier) >= -kLn2)
      res.trace.tn[static_cast<std::size_t>(frontier++)] = 0.0;

  std::size_t next_sample = 0;
  auto record_sample = [&](const std::vector<double>& suf) {
    PamSnapshot snap = take_snapshot(f, suf);
    res.trace.times.push_back(f.time);
    Breakpoint bp{};
    try {
      bp = breakpoint(snap, -kLn2);
    } catch (const FrontNotFormed&) {
      bp = {cfg.domain.lo - 1, static_cast<double>(cfg.domain.lo - 1)};
    }
    res.trace.m_bar.push_back(bp);
    for (std::size_t vi = 0; vi < cfg.velocities.size(); ++vi) {
      Breakpoint bv{};
      try {
        bv = breakpoint_v(snap, cfg.lambdas[vi]);
      } catch (const FrontNotFormed&) {
        bv = {cfg.domain.lo - 1, static_cast<double>(cfg.domain.lo - 1)};
      }
      res.trace.m_bar_v[vi].push_back(bv);
      res.trace.u_v[vi].push_back(u_v_stat(snap, cfg.velocities[vi], cfg.lambdas[vi]));
    }
    res.snapshots.push_back(std::move(snap));
  };

  if (next_sample < cfg.sample_times.size() && cfg.sample_times[next_sample] <= 1e-12) {
    record_sample(suf_a);
    ++next_sample;
  }

  while (f.time < T - 1e-12) {
    double step = dt;
    double target = T;
    if (next_sample < cfg.sample_times.size())
      target = std::min(target, cfg.sample_times[next_sample]);
    if (f.time + step >= target - 1e-12) step = target - f.time;

    IntegratorConfig ic = cfg.integ;
    ic.dt = step;
    step_linear(f, pot, ic);

    std::vector<double>& cur = cur_is_a ? suf_b : suf_a;
    std::vector<double>& prev = cur_is_a ? suf_a : suf_b;
    suffix_sums(f.v, cur);

    if (cfg.tn_max >= 0) {
      while (frontier <= cfg.tn_max) {
        const double lt = ln_tail_of(cur, f.offset, frontier);
        if (lt < -kLn2) break;
        // linear-in-t inversion between the two step endpoints
        const double lt_prev = ln_tail_of(prev, prev_offset, frontier);
        double tcross = f.time;
        if (std::isfinite(lt_prev) && lt > lt_prev) {
          const double frac = (-kLn2 - lt_prev) / (lt - lt_prev);
          tcross = f.time - step + step * std::clamp(frac, 0.0, 1.0);
        }
        res.trace.tn[static_cast<std::size_t>(frontier)] = tcross;
        ++frontier;
      }
    }

    prev_offset = f.offset;
    cur_is_a = !cur_is_a;

    if (next_sample < cfg.sample_times.size() &&
        f.time >= cfg.sample_times[next_sample] - 1e-12) {
      record_sample(cur_is_a ? suf_a : suf_b);
      ++next_sample;
    }
  }
  return res;
}

double tail_log_sum(const LogField& f, std::int64_t x) {
  if (x > f.x_hi()) return kNegInf;
  const std::int64_t from = std::max(x, f.x_lo);
  double acc = 0.0;
  for (std::int64_t y = f.x_hi(); y >= from; --y) acc += f.at(y);
  return acc > 0.0 ? f.offset + std::log(acc) : kNegInf;
}

Breakpoint breakpoint(const PamSnapshot& snap, double ln_threshold) {
  // largest x with ln_tail(x) >= threshold; tail is non-increasing in x
  const std::int64_t n = static_cast<std::int64_t>(snap.ln_tail.size());
  std::int64_t found = -1;
  for (std::int64_t j = n - 1; j >= 0; --j) {
    if (snap.ln_tail[static_cast<std::size_t>(j)] >= ln_threshold) {
      found = j;
      break;
    }
  }
  if (found < 0)
    throw FrontNotFormed("breakpoint: tail below threshold everywhere at t = " +
                         std::to_string(snap.t));
  Breakpoint bp;
  bp.m_bar = snap.x_lo + found;
  bp.interp = static_cast<double>(bp.m_bar);
  if (found + 1 < n) {
    const double a = snap.ln_tail[static_cast<std::size_t>(found)];
    const double b = snap.ln_tail[static_cast<std::size_t>(found + 1)];
    if (std::isfinite(b) && b < ln_threshold && a > b)
      bp.interp += (a - ln_threshold) / (a - b);
  }
  return bp;
}

Breakpoint breakpoint_v(const PamSnapshot& snap, double lambda_v) {
  return breakpoint(snap, snap.t * lambda_v - kLn2);
}

double u_v_stat(const PamSnapshot& snap, double v, double lambda_v) {
  return snap.t * lambda_v - snap.ln_tail_interp(v * snap.t) - kLn2;
}

YRestricted y_restricted(const Environment& env, std::int64_t n, double v, double eta, double K,
                         std::int64_t left_margin, double dt) {
  if (!(v > 0.0)) throw InvalidArgument("y_restricted: v must be positive");
  const double t_final = static_cast<double>(n) / v;
  const double t_less = t_final - K;
  if (t_less <= 0.0) throw InvalidArgument("y_restricted: n/v must exceed K");
  if (left_margin <= 0)
    left_margin = static_cast<std::int64_t>(8.0 * std::sqrt(t_final)) + 32;

  const Window domain{-left_margin, n - 1};
  if (!(env.window.lo <= domain.lo && env.window.hi >= domain.hi))
    throw DomainTooSmall("y_restricted: environment window too small");
  const double es = env.law.es();
  std::vector<double> psi(static_cast<std::size_t>(domain.size()));
  for (std::int64_t x = domain.lo; x <= domain.hi; ++x)
    psi[static_cast<std::size_t>(x - domain.lo)] = env.at(x) - es + eta;

  PlainField r;
  r.x_lo = domain.lo;
  r.v.assign(static_cast<std::size_t>(domain.size()), 0.0);

  IntegratorConfig ic;
  ic.dt = dt > 0.0 ? dt : default_dt(0.0);
  const double base_dt = ic.dt;

  double r_less = -1.0;
  const double origin_t[2] = {t_less, t_final};
  int stage = 0;
  while (stage < 2) {
    double step = base_dt;
    if (r.time + step >= origin_t[stage] - 1e-12) step = origin_t[stage] - r.time;
    IntegratorConfig sc = ic;
    sc.dt = step;
    step_dirichlet(r, psi, sc);
    if (r.time >= origin_t[stage] - 1e-12) {
      if (stage == 0)
        r_less = r.at(0);
      else {
        YRestricted out;
        const double r_full = r.at(0);
        if (!(r_full > 0.0)) throw NumericalError("y_restricted: Y vanished");
        out.ln_y = std::log(r_full);
        out.ln_y_less = r_less > 0.0 ? std::log(r_less) : kNegInf;
        const double ratio = r_less / r_full;
        if (ratio >= 1.0)
          throw NumericalError("y_restricted: Y-approx lost to rounding (ratio " +
                               std::to_string(ratio) + ")");
        out.ln_y_approx = out.ln_y + std::log1p(-ratio);
        return out;
      }
      ++stage;
    }
  }
  throw NumericalError("y_restricted: unreachable");
}

SecondMoment second_moment_between(const Environment& env, const Barrier& phi1,
                                   const Barrier& phi2, double t, double dt,
                                   Window domain) {
  if (domain.size() <= 1) domain = env.window;
  if (!(env.window.lo <= domain.lo && env.window.hi >= domain.hi))
    throw DomainTooSmall("second_moment_between: domain exceeds environment");
  const auto xi = potential_on(env, domain);
  const double base_dt = dt > 0.0 ? dt : default_dt(env.max_xi());
  const auto n_steps = static_cast<std::int64_t>(std::ceil(t / base_dt - 1e-12));
  const double h = t / static_cast<double>(n_steps);

  const std::size_t n = xi.size();

  // Active index range [jlo, jhi] of the barrier interval at time s,
  // clamped to the domain; barriers are sampled once per step.
  auto active = [&](double s) -> std::pair<std::int64_t, std::int64_t> {
    const double lo = phi1(s), hi = phi2(s);
    const std::int64_t jlo =
        std::max<std::int64_t>(static_cast<std::int64_t>(std::ceil(lo)), domain.lo) - domain.lo;
    const std::int64_t jhi =
        std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(hi)), domain.hi) - domain.lo;
    return {jlo, jhi};
  };

  auto project = [&](std::vector<double>& u, std::pair<std::int64_t, std::int64_t> rng) {
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(n); ++j)
      if (j < rng.first || j > rng.second) u[static_cast<std::size_t>(j)] = 0.0;
  };

  // One RK4 step of the killed problem: exact Dirichlet generator on the
  // active subrange (absorbing ghosts), everything outside zeroed.
  auto killed_step = [&](std::vector<double>& u, double s) {
    const auto rng = active(s);
    project(u, rng);
    if (rng.first > rng.second) return;
    const auto len = static_cast<std::size_t>(rng.second - rng.first + 1);
    LogField sub;
    sub.x_lo = 0;
    sub.v.assign(u.begin() + rng.first, u.begin() + rng.first + static_cast<std::int64_t>(len));
    std::vector<double> xi_sub(xi.begin() + rng.first,
                               xi.begin() + rng.first + static_cast<std::int64_t>(len));
    IntegratorConfig ic;
    ic.dt = h;
    ic.check_boundary = false;
    ic.renormalize_every = 1 << 30;  // raw values; t <= 4 keeps them in range
    step_linear(sub, xi_sub, ic);
    std::copy(sub.v.begin(), sub.v.end(), u.begin() + rng.first);
  };

  // forward killed field k(s_m, .), stored per node
  std::vector<std::vector<double>> fwd(static_cast<std::size_t>(n_steps) + 1);
  {
    std::vector<double> u(n, 0.0);
    u[static_cast<std::size_t>(-domain.lo)] = 1.0;
    project(u, active(0.0));
    fwd[0] = u;
    for (std::int64_t m = 0; m < n_steps; ++m) {
      killed_step(u, static_cast<double>(m) * h);
      project(u, active(static_cast<double>(m + 1) * h));
      fwd[static_cast<std::size_t>(m + 1)] = u;
    }
  }

  // backward survival weight G(s_m, .) = E_y[exp-integral over [s_m, t]],
  // integrated in tau = t - s with the same (self-adjoint) generator
  std::vector<std::vector<double>> bwd(static_cast<std::size_t>(n_steps) + 1);
  {
    std::vector<double> g(n, 1.0);
    project(g, active(t));
    bwd[static_cast<std::size_t>(n_steps)] = g;
    for (std::int64_t m = n_steps; m-- > 0;) {
      killed_step(g, static_cast<double>(m) * h);
      project(g, active(static_cast<double>(m) * h));
      bwd[static_cast<std::size_t>(m)] = g;
    }
  }

  auto integrand = [&](std::int64_t m) {
    double s = 0.0;
    const auto& k = fwd[static_cast<std::size_t>(m)];
    const auto& g = bwd[static_cast<std::size_t>(m)];
    for (std::size_t j = 0; j < n; ++j) s += k[j] * xi[j] * g[j] * g[j];
    return 2.0 * s;
  };

  auto trapezoid = [&](std::int64_t stride) {
    double acc = 0.0;
    std::int64_t m = 0;
    for (; m + stride <= n_steps; m += stride)
      acc += 0.5 * (integrand(m) + integrand(m + stride)) * h * static_cast<double>(stride);
    if (m < n_steps) acc += 0.5 * (integrand(m) + integrand(n_steps)) * h *
                            static_cast<double>(n_steps - m);
    return acc;
  };

  SecondMoment out;
  for (double x : fwd[static_cast<std::size_t>(n_steps)]) out.first_moment += x;
  const double fine = trapezoid(1);
  const double coarse = trapezoid(2);
  out.value = out.first_moment + fine;
  out.resolution_warning =
      std::abs(fine - coarse) > 0.01 * std::max(1e-300, std::abs(out.value));
  return out;
}

std::vector<LogNResidual> explicit_logn_check(const Environment& env,
                                              std::span<const std::int64_t> n_grid, double v0,
                                              double eta_bar, double l_value,
                                              const PamConfig& base_cfg) {
  PamConfig cfg = base_cfg;
  cfg.sample_times.clear();
  for (std::int64_t n : n_grid) cfg.sample_times.push_back(static_cast<double>(n) / v0);
  std::sort(cfg.sample_times.begin(), cfg.sample_times.end());
  cfg.sample_times.erase(std::unique(cfg.sample_times.begin(), cfg.sample_times.end()),
                         cfg.sample_times.end());
  const double T = cfg.sample_times.back();
  const PamResult res = run_pam(env, U0Spec{}, T, cfg);

  const ZetaView z = zeta_of(env);
  const std::int64_t n_max = *std::max_element(n_grid.begin(), n_grid.end());
  const auto evals = log_mgf_range(z, 1, n_max, eta_bar);

  std::vector<LogNResidual> out;
  for (std::int64_t n : n_grid) {
    const double tn = static_cast<double>(n) / v0;
    const PamSnapshot* snap = nullptr;
    for (const auto& s : res.snapshots)
      if (std::abs(s.t - tn) < 1e-9) snap = &s;
    if (snap == nullptr) throw NumericalError("explicit_logn_check: missing snapshot");
    double series = 0.0;
    for (std::int64_t i = 0; i < n; ++i) series += evals[static_cast<std::size_t>(i)].value;
    series -= static_cast<double>(n) * l_value;
    const double lt = snap->ln_tail_at(n);
    out.push_back({n, lt, series, std::abs(lt - series)});
  }
  return out;
}

}  // namespace brw
